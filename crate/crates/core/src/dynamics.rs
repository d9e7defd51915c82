//! Free density, the linearized density equation as a second-kind Volterra
//! problem per Fourier mode, and the Fourier-side sup-norm majorant.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{sphere_area, Marginal, Potential};
use crate::quadrature::{gauss_legendre, ChebOptions, PiecewiseCheb};

/// `γ̂₀(k, p)` for arbitrary kernels.
pub type KernelFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;

/// One term `weight · e^{−α(|x|² + |y|²)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub weight: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `γ₀(x, y) = amplitude · e^{−α(|x|² + |y|²)}`.
    GaussianPure { amplitude: f64, alpha: f64 },
    /// `γ₀(x, y) = Σ_j weight_j e^{−α_j|x|²} e^{−α_j|y|²}`.
    SeparableSum { terms: Vec<GaussianTerm> },
    /// Kernel given directly in Fourier variables.
    GridCustom { name: String, box_half_width: f64 },
}

#[derive(Clone)]
pub struct InitialKernel {
    pub kind: KernelKind,
    pub d: usize,
    custom: Option<KernelFn>,
}

impl fmt::Debug for InitialKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialKernel")
            .field("kind", &self.kind)
            .field("d", &self.d)
            .finish()
    }
}

impl InitialKernel {
    pub fn gaussian(d: usize, amplitude: f64, alpha: f64) -> Self {
        InitialKernel {
            kind: KernelKind::GaussianPure { amplitude, alpha },
            d,
            custom: None,
        }
    }

    pub fn separable(d: usize, terms: Vec<GaussianTerm>) -> Self {
        InitialKernel {
            kind: KernelKind::SeparableSum { terms },
            d,
            custom: None,
        }
    }

    pub fn custom(d: usize, name: &str, box_half_width: f64, g: KernelFn) -> Self {
        InitialKernel {
            kind: KernelKind::GridCustom {
                name: name.into(),
                box_half_width,
            },
            d,
            custom: Some(g),
        }
    }

    /// The zero kernel.
    pub fn zero(d: usize) -> Self {
        InitialKernel::separable(d, vec![])
    }

    fn terms(&self) -> Option<Vec<GaussianTerm>> {
        match &self.kind {
            KernelKind::GaussianPure { amplitude, alpha } => Some(vec![GaussianTerm {
                weight: *amplitude,
                alpha: *alpha,
            }]),
            KernelKind::SeparableSum { terms } => Some(terms.clone()),
            KernelKind::GridCustom { .. } => None,
        }
    }

    /// Same kernel with every weight multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            KernelKind::GaussianPure { amplitude, .. } => *amplitude *= s,
            KernelKind::SeparableSum { terms } => terms.iter_mut().for_each(|t| t.weight *= s),
            KernelKind::GridCustom { .. } => {
                let g = self.custom.clone().expect("custom kernel");
                out.custom = Some(Arc::new(move |k: &[f64], p: &[f64]| g(k, p) * s));
            }
        }
        out
    }

    /// `γ̂₀(k, p) = ∫∫ e^{−ik·x − ip·y} γ₀(x, y) dx dy`.
    pub fn gamma0_hat(&self, k: &[f64], p: &[f64]) -> Complex64 {
        if let Some(g) = &self.custom {
            return g(k, p);
        }
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let p2: f64 = p.iter().map(|x| x * x).sum();
        let d = self.d as i32;
        let v: f64 = self
            .terms()
            .unwrap_or_default()
            .iter()
            .map(|t| t.weight * (PI / t.alpha).powi(d) * (-(k2 + p2) / (4.0 * t.alpha)).exp())
            .sum();
        Complex64::new(v, 0.0)
    }

    /// Closed-form ρ̂⁰(t, k) for Gaussian kinds.
    pub fn free_density_closed(&self, k_mag: f64, t: f64) -> Option<f64> {
        let terms = self.terms()?;
        let d = self.d as i32;
        Some(
            terms
                .iter()
                .map(|g| {
                    let a = g.alpha;
                    g.weight
                        * 0.5f64.powi(d)
                        * (PI / a).powi(d)
                        * (8.0 * a * PI).powf(self.d as f64 / 2.0)
                        * (-k_mag * k_mag / (8.0 * a)).exp()
                        * (-2.0 * a * t * t * k_mag * k_mag).exp()
                })
                .sum(),
        )
    }

    /// Half-width of the cube in v on which γ̂₀((k+v)/2, (k−v)/2) is integrated.
    pub fn box_half_width(&self) -> f64 {
        match &self.kind {
            KernelKind::GridCustom { box_half_width, .. } => *box_half_width,
            _ => {
                let a = self
                    .terms()
                    .unwrap_or_default()
                    .iter()
                    .map(|t| t.alpha)
                    .fold(0.0, f64::max);
                // e^{−v²/(8α)} < e^{−40}
                (320.0 * a).sqrt().max(1.0)
            }
        }
    }

    /// Max |γ̂₀| on the box boundary relative to its max on a coarse box grid.
    fn boundary_ratio(&self, k: &[f64]) -> f64 {
        let l = self.box_half_width();
        let d = self.d;
        let n = 9usize;
        let mut inner = 0.0f64;
        let mut edge = 0.0f64;
        let total = n.pow(d as u32);
        let mut v = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            let mut on_edge = false;
            for c in v.iter_mut() {
                let i = r % n;
                r /= n;
                *c = -l + 2.0 * l * i as f64 / (n - 1) as f64;
                on_edge |= i == 0 || i == n - 1;
            }
            let (kp, pp) = half_sum_diff(k, &v);
            let g = self.gamma0_hat(&kp, &pp).norm();
            inner = inner.max(g);
            if on_edge {
                edge = edge.max(g);
            }
        }
        if inner == 0.0 {
            0.0
        } else {
            edge / inner
        }
    }

    /// Fourier-side surrogate for the weighted initial norm:
    /// `sup_{k,p} ⟨k,p⟩^{N₂}|γ̂₀(k,p)|` over a cube grid of half-width `box_half_width`.
    pub fn epsilon_surrogate(&self, n2: f64, box_half_width: f64, n_pts: usize) -> f64 {
        let d = self.d;
        let n = n_pts.max(2);
        let total = n.pow(2 * d as u32);
        let mut best = 0.0f64;
        let mut x = vec![0.0; 2 * d];
        for idx in 0..total {
            let mut r = idx;
            for c in x.iter_mut() {
                *c = -box_half_width + 2.0 * box_half_width * (r % n) as f64 / (n - 1) as f64;
                r /= n;
            }
            let s: f64 = x.iter().map(|c| c * c).sum();
            let g = self.gamma0_hat(&x[..d], &x[d..]).norm();
            best = best.max((1.0 + s).powf(n2 / 2.0) * g);
        }
        best
    }
}

fn half_sum_diff(k: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        k.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect(),
        k.iter().zip(v).map(|(a, b)| 0.5 * (a - b)).collect(),
    )
}

/// Orthonormal basis with `e[0] = k/|k|` (any basis when k = 0).
fn frame(k: &[f64]) -> Vec<Vec<f64>> {
    let d = k.len();
    let norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut cands: Vec<Vec<f64>> = Vec::new();
    if norm > 0.0 {
        cands.push(k.iter().map(|x| x / norm).collect());
    }
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        cands.push(e);
    }
    for mut c in cands {
        for b in &basis {
            let dot: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
            c.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(c.iter().map(|x| x / n).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreeDensityValue {
    pub value: Complex64,
    /// γ̂₀ on the truncation-box boundary exceeds 1e−12 of its interior maximum.
    pub truncation_warning: bool,
    pub evaluations: usize,
}

/// ρ̂⁰(t, k) = 2^{−d} ∫ e^{−itk·v} γ̂₀((k+v)/2, (k−v)/2) dv, by exact oscillatory
/// integration along k/|k| of a Chebyshev interpolant of the transverse
/// tensor Gauss–Legendre integral.
pub fn free_density(g0: &InitialKernel, k: &[f64], t: f64) -> Result<FreeDensityValue> {
    let d = g0.d;
    if k.len() != d {
        return Err(Error::InvalidInput(format!("wavevector has {} components, expected {d}", k.len())));
    }
    let l = g0.box_half_width();
    let basis = frame(k);
    let kmag = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (gx, gw) = gauss_legendre(64);
    let m = d - 1;
    let n_perp = gx.len().pow(m as u32);
    let transverse = |v1: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut v = vec![0.0; d];
        for idx in 0..n_perp {
            let mut r = idx;
            let mut w = 1.0;
            v.iter_mut().zip(&basis[0]).for_each(|(c, e)| *c = v1 * e);
            for b in basis.iter().skip(1) {
                let j = r % gx.len();
                r /= gx.len();
                let s = l * gx[j];
                w *= l * gw[j];
                v.iter_mut().zip(b).for_each(|(c, e)| *c += s * e);
            }
            let (kp, pp) = half_sum_diff(k, &v);
            acc += w * g0.gamma0_hat(&kp, &pp);
        }
        acc
    };
    let opts = ChebOptions {
        abs_tol: 1e-16,
        rel_tol: 1e-13,
        max_panels: 4000,
        min_width: 1e-8 * l,
    };
    let pts: Vec<f64> = (0..=8).map(|i| -l + 2.0 * l * i as f64 / 8.0).collect();
    let table = PiecewiseCheb::<Complex64>::adaptive(&transverse, &pts, opts)?;
    let evaluations = table.panels().len() * 17 * n_perp;
    let value = table.oscillatory().integral(-t * kmag) * 0.5f64.powi(d as i32);
    Ok(FreeDensityValue {
        value,
        truncation_warning: g0.boundary_ratio(k) > 1e-12,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub d: usize,
    pub n1: f64,
    pub n2: f64,
}

/// ρ̂ₖ(t) on a radial k grid (or a list of modes) times a uniform t grid;
/// `rho_hat[ik][it]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTrajectory {
    pub k_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub rho_hat: Vec<Vec<Complex64>>,
    pub radial: bool,
    pub meta: TrajectoryMeta,
}

impl DensityTrajectory {
    pub fn zeros(k_grid: Vec<f64>, t_grid: Vec<f64>, meta: TrajectoryMeta) -> Self {
        let rho_hat = vec![vec![Complex64::new(0.0, 0.0); t_grid.len()]; k_grid.len()];
        DensityTrajectory {
            k_grid,
            t_grid,
            rho_hat,
            radial: true,
            meta,
        }
    }

    /// Uniform time step, or `GridMismatch` if the grid is not uniform from 0.
    pub fn dt(&self) -> Result<f64> {
        uniform_step(&self.t_grid)
    }

    pub fn sup_abs(&self) -> f64 {
        self.rho_hat
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// max |a − b| over the shared grid.
    pub fn max_diff(&self, other: &DensityTrajectory) -> Result<f64> {
        if self.k_grid != other.k_grid || self.t_grid != other.t_grid {
            return Err(Error::GridMismatch("trajectories live on different grids".into()));
        }
        Ok(self
            .rho_hat
            .iter()
            .zip(&other.rho_hat)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }
}

pub fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::GridMismatch("time grid needs at least two nodes".into()));
    }
    if t[0] != 0.0 {
        return Err(Error::GridMismatch("time grid must start at 0".into()));
    }
    let h = t[1] - t[0];
    if !(h > 0.0) {
        return Err(Error::GridMismatch("time grid must increase".into()));
    }
    for (i, &ti) in t.iter().enumerate() {
        if (ti - i as f64 * h).abs() > 1e-9 * h.max(ti.abs()) {
            return Err(Error::GridMismatch(format!("time grid not uniform at node {i}")));
        }
    }
    Ok(h)
}

/// `[0, dt, 2dt, …]` up to `t_max`.
pub fn uniform_grid(dt: f64, t_max: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// Geometric grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Free trajectory on radial k grid; closed form for Gaussian kinds, otherwise
/// [`free_density`] with k along the first axis.
pub fn free_trajectory(g0: &InitialKernel, k_grid: &[f64], t_grid: &[f64], meta: TrajectoryMeta) -> Result<DensityTrajectory> {
    let mut out = DensityTrajectory::zeros(k_grid.to_vec(), t_grid.to_vec(), meta);
    let rows: Vec<Result<Vec<Complex64>>> = k_grid
        .par_iter()
        .map(|&k| {
            t_grid
                .iter()
                .map(|&t| match g0.free_density_closed(k, t) {
                    Some(v) => Ok(Complex64::new(v, 0.0)),
                    None => {
                        let mut kv = vec![0.0; g0.d];
                        kv[0] = k;
                        Ok(free_density(g0, &kv, t)?.value)
                    }
                })
                .collect()
        })
        .collect();
    for (dst, r) in out.rho_hat.iter_mut().zip(rows) {
        *dst = r?;
    }
    Ok(out)
}

/// K_k(t) = 2ŵ(k) sin(tk²) φ̂(2tk), whose Laplace transform is D(λ, k) − 1.
pub fn volterra_kernel(m: &Marginal, w: &Potential, k: f64, t: f64) -> f64 {
    let wk = w.w_hat(k);
    if wk == 0.0 || t == 0.0 {
        return 0.0;
    }
    let s = 2.0 * t * k;
    if let Some(cut) = m.phi_hat_decay_radius() {
        if s > cut {
            return 0.0;
        }
    }
    2.0 * wk * (t * k * k).sin() * m.phi_hat(s)
}

/// Time-quadrature rule for convolution sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    Trapezoid,
    /// Gregory end corrections (fourth order), Simpson-type rules on the first
    /// few steps.
    #[default]
    Gregory,
}

/// Weights `w_j` with `∫_0^{nh} f ≈ h Σ_{j=0}^{n} w_j f(jh)`.
pub fn quadrature_weights(n: usize, rule: TimeRule) -> Vec<f64> {
    let mut w = vec![1.0; n + 1];
    if n == 0 {
        w[0] = 0.0;
        return w;
    }
    match rule {
        TimeRule::Trapezoid => {
            w[0] = 0.5;
            w[n] = 0.5;
        }
        TimeRule::Gregory => match n {
            1 => w = vec![0.5, 0.5],
            2 => w = vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
            3 => w = vec![3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
            4 => w = vec![1.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
            _ => {
                let e = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
                for (i, &c) in e.iter().enumerate() {
                    w[i] = c;
                    w[n - i] = c;
                }
            }
        },
    }
    w
}

/// `W_j = ∫_0^h A(h − s) L_j(s) ds / h`, with A the cubic through `a[0..4]` on
/// `0, h, 2h, 3h` and `L_j` the quadratic Lagrange basis on `0, h, 2h`.
fn first_step_weights(a: &[Complex64]) -> [Complex64; 3] {
    let (x, w) = gauss_legendre(8);
    let cubic = |u: f64| -> Complex64 {
        // u in units of h
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            let mut l = 1.0;
            for j in 0..4 {
                if j != i {
                    l *= (u - j as f64) / (i as f64 - j as f64);
                }
            }
            acc += a[i] * l;
        }
        acc
    };
    let lag = |j: usize, u: f64| -> f64 {
        let mut l = 1.0;
        for i in 0..3 {
            if i != j {
                l *= (u - i as f64) / (j as f64 - i as f64);
            }
        }
        l
    };
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (xi, wi) in x.iter().zip(&w) {
        let u = 0.5 * (xi + 1.0);
        let av = cubic(1.0 - u);
        for (j, o) in out.iter_mut().enumerate() {
            *o += 0.5 * wi * av * lag(j, u);
        }
    }
    out
}

/// `out_n = ∫_0^{nh} a(nh − s) b(s) ds` for every n on a uniform grid.
pub fn convolve_weighted(a: &[Complex64], b: &[Complex64], h: f64, rule: TimeRule) -> Vec<Complex64> {
    let n = a.len().min(b.len());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        if i == 1 && rule == TimeRule::Gregory && n >= 4 {
            let w = first_step_weights(a);
            *o = h * (w[0] * b[0] + w[1] * b[1] + w[2] * b[2]);
            continue;
        }
        let w = quadrature_weights(i, rule);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=i {
            acc += w[j] * a[i - j] * b[j];
        }
        *o = acc * h;
    }
    out
}

/// Solves ρ(t) + ∫_0^t K(t − s)ρ(s) ds = S(t) on a uniform grid by marching.
///
/// With the Gregory rule the first two steps are solved together: step one by
/// product integration against the quadratic through ρ₀, ρ₁, ρ₂, step two by Simpson.
pub fn volterra_march(kernel: &[f64], source: &[Complex64], h: f64, rule: TimeRule) -> Result<Vec<Complex64>> {
    let n = source.len();
    if kernel.len() < n {
        return Err(Error::GridMismatch("kernel shorter than source".into()));
    }
    let mut rho = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(rho);
    }
    let kc: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
    rho[0] = source[0];
    let mut start = 1;
    if rule == TimeRule::Gregory && n >= 4 {
        let w = first_step_weights(&kc);
        let k0 = kernel[0];
        // [1 + hW₁, hW₂; 4hK₁/3, 1 + hK₀/3] [ρ₁; ρ₂] = rhs
        let a11 = 1.0 + h * w[1];
        let a12 = h * w[2];
        let a21 = Complex64::new(4.0 * h * kernel[1] / 3.0, 0.0);
        let a22 = Complex64::new(1.0 + h * k0 / 3.0, 0.0);
        let r1 = source[1] - h * w[0] * rho[0];
        let r2 = source[2] - h * kernel[2] / 3.0 * rho[0];
        let det = a11 * a22 - a12 * a21;
        if det.norm() < 0.25 {
            return Err(Error::StepTooLarge(format!("start-up determinant {det}")));
        }
        rho[1] = (r1 * a22 - a12 * r2) / det;
        rho[2] = (a11 * r2 - a21 * r1) / det;
        start = 3;
    }
    for i in start..n {
        let w = quadrature_weights(i, rule);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..i {
            acc += w[j] * kernel[i - j] * rho[j];
        }
        let diag = 1.0 + h * w[i] * kernel[0];
        if diag.abs() < 0.5 {
            return Err(Error::StepTooLarge(format!("1 + h·w·K(0) = {diag}")));
        }
        rho[i] = (source[i] - h * acc) / diag;
    }
    Ok(rho)
}

/// Linearized density from the source `S`, one Volterra march per k.
pub fn volterra_solve(m: &Marginal, w: &Potential, s: &DensityTrajectory) -> Result<DensityTrajectory> {
    volterra_solve_with(m, w, s, TimeRule::default())
}

pub fn volterra_solve_with(m: &Marginal, w: &Potential, s: &DensityTrajectory, rule: TimeRule) -> Result<DensityTrajectory> {
    let h = s.dt()?;
    let rows: Vec<Result<Vec<Complex64>>> = s
        .k_grid
        .par_iter()
        .zip(&s.rho_hat)
        .map(|(&k, src)| {
            if k == 0.0 || w.w_hat(k) == 0.0 {
                return Ok(src.clone());
            }
            let kern: Vec<f64> = s.t_grid.iter().map(|&t| volterra_kernel(m, w, k, t)).collect();
            volterra_march(&kern, src, h, rule)
        })
        .collect();
    let mut out = s.clone();
    for (dst, r) in out.rho_hat.iter_mut().zip(rows) {
        *dst = r?;
    }
    Ok(out)
}

/// `(2π)^{−d}|S^{d−1}| ∫_0^∞ r^{n+d−1}|ρ̂_r(t)| dr` per time node: the Fourier L¹
/// majorant of ‖∂ⁿρ(t)‖_∞. The radial integral uses the trapezoid rule in ln r
/// plus `r₀^{n+d}|ρ̂_{r₀}|/(n+d)` for `[0, r₀]`.
pub fn reconstruct_sup_norm(rho: &DensityTrajectory, n: usize) -> Result<Vec<(f64, f64)>> {
    if !rho.radial {
        return Err(Error::NonRadialInput);
    }
    let d = rho.meta.d;
    let p = (n + d) as i32;
    let pre = sphere_area(d - 1) / (2.0 * PI).powi(d as i32);
    let idx: Vec<usize> = (0..rho.k_grid.len()).filter(|&i| rho.k_grid[i] > 0.0).collect();
    if idx.windows(2).any(|w| rho.k_grid[w[1]] <= rho.k_grid[w[0]]) {
        return Err(Error::InvalidInput("radial grid must be increasing".into()));
    }
    let mut out = Vec::with_capacity(rho.t_grid.len());
    for (it, &t) in rho.t_grid.iter().enumerate() {
        let g = |i: usize| rho.k_grid[i].powi(p) * rho.rho_hat[i][it].norm();
        let mut total = 0.0;
        if let Some(&i0) = idx.first() {
            total += g(i0) / p as f64;
        }
        for w in idx.windows(2) {
            let ds = (rho.k_grid[w[1]] / rho.k_grid[w[0]]).ln();
            total += 0.5 * ds * (g(w[0]) + g(w[1]));
        }
        out.push((t, pre * total));
    }
    Ok(out)
}

/// ρ(t, x = 0) = (2π)^{−d}∫ρ̂ₖ(t)dk for a radial trajectory, per time node.
pub fn density_at_origin(rho: &DensityTrajectory) -> Result<Vec<(f64, Complex64)>> {
    if !rho.radial {
        return Err(Error::NonRadialInput);
    }
    let d = rho.meta.d;
    let pre = sphere_area(d - 1) / (2.0 * PI).powi(d as i32);
    let ks = &rho.k_grid;
    Ok(rho
        .t_grid
        .iter()
        .enumerate()
        .map(|(it, &t)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 1..ks.len() {
                let f = |j: usize| rho.rho_hat[j][it] * ks[j].powi(d as i32 - 1);
                acc += 0.5 * (ks[i] - ks[i - 1]) * (f(i) + f(i - 1));
            }
            (t, pre * acc)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_marginal, EquilibriumProfile};

    fn meta(d: usize) -> TrajectoryMeta {
        TrajectoryMeta {
            d,
            n1: d as f64 + 1.0,
            n2: d as f64 + 1.0,
        }
    }

    #[test]
    fn gaussian_free_density_matches_closed_form() {
        let g0 = InitialKernel::gaussian(3, 1.0, 1.0);
        for &(k, t) in &[(0.5, 0.0), (0.5, 1.0), (1.3, 0.7), (0.0, 3.0)] {
            let num = free_density(&g0, &[k, 0.0, 0.0], t).unwrap();
            // 2^{-3}π³(8π)^{3/2} e^{-k²/8} e^{-2k²t²}
            let exact = 0.125 * PI.powi(3) * (8.0 * PI).powf(1.5) * (-k * k / 8.0).exp() * (-2.0 * k * k * t * t).exp();
            assert!((num.value.re - exact).abs() < 1e-9 * exact.max(1e-3), "{k} {t}: {} vs {exact}", num.value);
            assert!(num.value.im.abs() < 1e-9);
            assert!(!num.truncation_warning);
        }
    }

    #[test]
    fn free_density_direction_independent() {
        let g0 = InitialKernel::gaussian(2, 1.0, 0.7);
        let a = free_density(&g0, &[0.8, 0.0], 1.1).unwrap().value;
        let c = 0.8 / 2f64.sqrt();
        let b = free_density(&g0, &[c, c], 1.1).unwrap().value;
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn zero_mode_is_constant() {
        let g0 = InitialKernel::gaussian(1, 1.0, 1.0);
        let a = free_density(&g0, &[0.0], 0.0).unwrap().value;
        let b = free_density(&g0, &[0.0], 10.0).unwrap().value;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn gregory_weights_integrate_cubics() {
        // n = 1 falls back to the trapezoid
        for n in 2..12 {
            let w = quadrature_weights(n, TimeRule::Gregory);
            let h = 1.0 / n as f64;
            let s: f64 = w.iter().enumerate().map(|(j, c)| c * (j as f64 * h).powi(3)).sum::<f64>() * h;
            assert!((s - 0.25).abs() < 1e-12, "n={n}: {s}");
        }
    }

    #[test]
    fn constant_kernel_resolvent() {
        // ρ + c∫_0^t ρ = 1 has ρ = e^{−ct}; K(0) ≠ 0 exercises the implicit diagonal
        let c = 0.8;
        let h = 0.01;
        let n = 501;
        let kern = vec![c; n];
        let src = vec![Complex64::new(1.0, 0.0); n];
        for rule in [TimeRule::Trapezoid, TimeRule::Gregory] {
            let rho = volterra_march(&kern, &src, h, rule).unwrap();
            let err = (0..n).map(|i| (rho[i].re - (-c * i as f64 * h).exp()).abs()).fold(0.0, f64::max);
            assert!(err < 1e-5, "{rule:?}: {err}");
        }
    }

    #[test]
    fn zero_potential_returns_source() {
        let m = build_marginal(&EquilibriumProfile::gaussian(3)).unwrap();
        let g0 = InitialKernel::gaussian(3, 1.0, 1.0);
        let s = free_trajectory(&g0, &[0.1, 1.0], &uniform_grid(0.1, 2.0), meta(3)).unwrap();
        let r = volterra_solve(&m, &Potential::zero(), &s).unwrap();
        assert_eq!(r, s);
        assert_eq!(volterra_kernel(&m, &Potential::screened_coulomb(), 1.0, 0.0), 0.0);
    }

    #[test]
    fn sup_norm_of_zero_is_zero() {
        let s = DensityTrajectory::zeros(log_grid(1e-3, 10.0, 20), uniform_grid(0.5, 5.0), meta(3));
        assert!(reconstruct_sup_norm(&s, 1).unwrap().iter().all(|p| p.1 == 0.0));
        let mut c = s.clone();
        c.radial = false;
        assert!(matches!(reconstruct_sup_norm(&c, 0), Err(Error::NonRadialInput)));
    }

    #[test]
    fn sup_norm_closed_form_at_t0() {
        // (2π)^{-3}4π∫r²·π³(8π)^{3/2}/8·e^{-r²/8}dr = (2π)^{-3}·π³(8π)^{3/2}/8·(8π)^{3/2}
        let g0 = InitialKernel::gaussian(3, 1.0, 1.0);
        let s = free_trajectory(&g0, &log_grid(1e-4, 40.0, 600), &[0.0, 1.0], meta(3)).unwrap();
        let b = reconstruct_sup_norm(&s, 0).unwrap();
        let exact = (2.0 * PI).powi(-3) * PI.powi(3) * (8.0 * PI).powi(3) / 8.0;
        assert!((b[0].1 / exact - 1.0).abs() < 1e-6, "{} vs {exact}", b[0].1);
    }
}
