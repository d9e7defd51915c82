//! Piecewise Chebyshev interpolants with exact-moment oscillatory integration.
//!
//! A function is sampled on adaptively bisected panels at 17 Chebyshev–Lobatto
//! points. Each panel then supports cheap evaluation, integration, differentiation
//! and Filon-type integrals `∫ p(u) e^{iωu} du` that stay accurate for any ω:
//! small panel phases use a 40-point Gauss–Legendre rule on the interpolant, large
//! ones the terminating integration-by-parts series, which is exact for polynomials.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use super::gauss::gl40;
use crate::error::{Error, Result};

/// Polynomial degree of every panel.
pub const DEGREE: usize = 16;
const NPTS: usize = DEGREE + 1;
/// Panel half-phase above which the integration-by-parts series is used.
const SIGMA_SWITCH: f64 = DEGREE as f64;

/// Scalar type usable as panel values.
pub trait Scalar:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + 'static
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

fn lobatto_nodes() -> &'static [f64; NPTS] {
    static NODES: OnceLock<[f64; NPTS]> = OnceLock::new();
    NODES.get_or_init(|| {
        let mut x = [0.0; NPTS];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (std::f64::consts::PI * j as f64 / DEGREE as f64).cos();
        }
        x
    })
}

/// T_j^{(m)}(1) for 0 ≤ j, m ≤ DEGREE.
fn endpoint_derivatives() -> &'static [[f64; NPTS]; NPTS] {
    static TABLE: OnceLock<[[f64; NPTS]; NPTS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; NPTS]; NPTS];
        for (m, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let mut p = 1.0;
                for r in 0..m {
                    let rf = r as f64;
                    p *= ((j * j) as f64 - rf * rf) / (2.0 * rf + 1.0);
                }
                *v = p;
            }
        }
        t
    })
}

/// Chebyshev coefficients from values at the Lobatto nodes (x_j = cos(πj/n)).
fn coefficients<T: Scalar>(values: &[T; NPTS]) -> [T; NPTS] {
    let n = DEGREE;
    let mut c = [T::zero(); NPTS];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut s = T::zero();
        for (j, v) in values.iter().enumerate() {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            let ang = std::f64::consts::PI * (j * k) as f64 / n as f64;
            s = s + *v * (w * ang.cos());
        }
        let scale = if k == 0 || k == n { 1.0 / n as f64 } else { 2.0 / n as f64 };
        *ck = s * scale;
    }
    c
}

fn clenshaw<T: Scalar>(c: &[T; NPTS], x: f64) -> T {
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for k in (1..NPTS).rev() {
        let b0 = c[k] + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + b1 * x - b2
}

/// One interpolation panel on [a, b].
#[derive(Debug, Clone)]
pub struct Panel<T: Scalar> {
    pub a: f64,
    pub b: f64,
    pub coeffs: [T; NPTS],
}

impl<T: Scalar> Panel<T> {
    fn from_fn<F: Fn(f64) -> T + ?Sized>(f: &F, a: f64, b: f64) -> Self {
        let nodes = lobatto_nodes();
        let mut vals = [T::zero(); NPTS];
        for (v, x) in vals.iter_mut().zip(nodes.iter()) {
            *v = f(0.5 * (a + b) + 0.5 * (b - a) * x);
        }
        Panel {
            a,
            b,
            coeffs: coefficients(&vals),
        }
    }

    fn tail(&self) -> f64 {
        self.coeffs[DEGREE].modulus() + self.coeffs[DEGREE - 1].modulus()
    }

    fn magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.modulus()).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: f64) -> T {
        let xt = (2.0 * x - self.a - self.b) / (self.b - self.a);
        clenshaw(&self.coeffs, xt)
    }

    pub fn integral(&self) -> T {
        let mut s = T::zero();
        for j in (0..NPTS).step_by(2) {
            s = s + self.coeffs[j] * (2.0 / (1.0 - (j * j) as f64));
        }
        s * (0.5 * (self.b - self.a))
    }

    pub fn derivative(&self) -> Panel<T> {
        let n = DEGREE;
        let mut d = [T::zero(); NPTS];
        if n >= 1 {
            d[n - 1] = self.coeffs[n] * (2.0 * n as f64);
            for k in (1..n).rev() {
                let next = if k + 1 <= n - 1 { d[k + 1] } else { T::zero() };
                d[k - 1] = next + self.coeffs[k] * (2.0 * k as f64);
            }
            d[0] = d[0] * 0.5;
        }
        let scale = 2.0 / (self.b - self.a);
        for v in d.iter_mut() {
            *v = *v * scale;
        }
        Panel {
            a: self.a,
            b: self.b,
            coeffs: d,
        }
    }
}

/// Options for adaptive panel construction.
#[derive(Debug, Clone, Copy)]
pub struct ChebOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub min_width: f64,
}

impl Default for ChebOptions {
    fn default() -> Self {
        ChebOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_panels: 20_000,
            min_width: 1e-12,
        }
    }
}

/// Piecewise Chebyshev interpolant over consecutive panels.
#[derive(Debug, Clone)]
pub struct PiecewiseCheb<T: Scalar> {
    panels: Vec<Panel<T>>,
    scale: f64,
}

impl<T: Scalar> PiecewiseCheb<T> {
    /// Builds an interpolant of `f` on `[points[0], points.last()]`, bisecting
    /// panels until the trailing coefficients fall below the tolerance.
    pub fn adaptive<F>(f: &F, points: &[f64], opts: ChebOptions) -> Result<Self>
    where
        F: Fn(f64) -> T + ?Sized,
    {
        let mut initial: Vec<Panel<T>> = points
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| Panel::from_fn(f, w[0], w[1]))
            .collect();
        let mut scale = initial.iter().map(|p| p.magnitude()).fold(0.0, f64::max);
        let mut done: Vec<Panel<T>> = Vec::new();
        initial.reverse();
        let mut stack = initial;
        while let Some(p) = stack.pop() {
            let target = opts.abs_tol.max(opts.rel_tol * scale);
            if p.tail() <= target || (p.b - p.a) <= opts.min_width {
                done.push(p);
            } else {
                let mid = 0.5 * (p.a + p.b);
                let right = Panel::from_fn(f, mid, p.b);
                let left = Panel::from_fn(f, p.a, mid);
                scale = scale.max(left.magnitude()).max(right.magnitude());
                stack.push(right);
                stack.push(left);
            }
            if done.len() + stack.len() > opts.max_panels {
                return Err(Error::UnresolvedOscillation {
                    panels: done.len() + stack.len(),
                    cap: opts.max_panels,
                });
            }
        }
        Ok(PiecewiseCheb {
            panels: done,
            scale,
        })
    }

    pub fn panels(&self) -> &[Panel<T>] {
        &self.panels
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lower(&self) -> f64 {
        self.panels.first().map(|p| p.a).unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.panels.last().map(|p| p.b).unwrap_or(0.0)
    }

    /// Sum over panels of the trailing-coefficient magnitude times the panel width,
    /// a proxy for the interpolation error of integrals.
    pub fn error_proxy(&self) -> f64 {
        self.panels.iter().map(|p| p.tail() * (p.b - p.a)).sum()
    }

    /// Evaluates the interpolant; zero outside the covered interval.
    pub fn eval(&self, x: f64) -> T {
        if self.panels.is_empty() || x < self.lower() || x > self.upper() {
            return T::zero();
        }
        let idx = self.panels.partition_point(|p| p.b < x);
        let idx = idx.min(self.panels.len() - 1);
        self.panels[idx].eval(x)
    }

    pub fn integral(&self) -> T {
        self.panels
            .iter()
            .fold(T::zero(), |acc, p| acc + p.integral())
    }

    pub fn derivative(&self) -> PiecewiseCheb<T> {
        let panels: Vec<Panel<T>> = self.panels.iter().map(|p| p.derivative()).collect();
        let scale = panels.iter().map(|p| p.magnitude()).fold(0.0, f64::max);
        PiecewiseCheb { panels, scale }
    }

    /// Precomputes the data needed for repeated oscillatory integrals.
    pub fn oscillatory(&self) -> OscillatoryIntegrator {
        OscillatoryIntegrator::new(self)
    }
}

#[derive(Debug, Clone)]
struct OscPanel {
    mid: f64,
    half: f64,
    gl_values: Vec<Complex64>,
    right: [Complex64; NPTS],
    left: [Complex64; NPTS],
}

/// Evaluates `∫ p(u) e^{iωu} du` over a piecewise Chebyshev interpolant for many ω.
#[derive(Debug, Clone)]
pub struct OscillatoryIntegrator {
    panels: Vec<OscPanel>,
}

impl OscillatoryIntegrator {
    fn new<T: Scalar>(pc: &PiecewiseCheb<T>) -> Self {
        let (x, _) = gl40();
        let table = endpoint_derivatives();
        let panels = pc
            .panels
            .iter()
            .map(|p| {
                let gl_values = x
                    .iter()
                    .map(|&xi| clenshaw(&p.coeffs, xi).to_complex())
                    .collect();
                let mut right = [Complex64::new(0.0, 0.0); NPTS];
                let mut left = [Complex64::new(0.0, 0.0); NPTS];
                for m in 0..NPTS {
                    let mut r = Complex64::new(0.0, 0.0);
                    let mut l = Complex64::new(0.0, 0.0);
                    for j in 0..NPTS {
                        let c = p.coeffs[j].to_complex();
                        let t = table[m][j];
                        r += c * t;
                        let sign = if (j + m) % 2 == 0 { 1.0 } else { -1.0 };
                        l += c * (sign * t);
                    }
                    right[m] = r;
                    left[m] = l;
                }
                OscPanel {
                    mid: 0.5 * (p.a + p.b),
                    half: 0.5 * (p.b - p.a),
                    gl_values,
                    right,
                    left,
                }
            })
            .collect();
        OscillatoryIntegrator { panels }
    }

    /// `∫ p(u) e^{iωu} du` over the full interpolation interval.
    pub fn integral(&self, omega: f64) -> Complex64 {
        let (x, w) = gl40();
        let mut total = Complex64::new(0.0, 0.0);
        for p in &self.panels {
            let sigma = omega * p.half;
            let local = if sigma.abs() <= SIGMA_SWITCH {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..x.len() {
                    s += p.gl_values[i] * Complex64::from_polar(w[i], sigma * x[i]);
                }
                s
            } else {
                let ep = Complex64::from_polar(1.0, sigma);
                let em = ep.conj();
                let is = Complex64::new(0.0, sigma);
                let mut s = Complex64::new(0.0, 0.0);
                let mut denom = is;
                for m in 0..NPTS {
                    let term = (p.right[m] * ep - p.left[m] * em) / denom;
                    if m % 2 == 0 {
                        s += term;
                    } else {
                        s -= term;
                    }
                    denom *= is;
                }
                s
            };
            total += local * Complex64::from_polar(p.half, omega * p.mid);
        }
        total
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }
}
