//! Equilibrium profiles `f(e)`, interaction potentials `ŵ(|k|)`, and the
//! one-dimensional marginal `φ(u) = ∫_{ℝ^{d−1}} f(u² + |w|²) dw`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    integrate, integrate_points, ChebOptions, OscillatoryIntegrator, PiecewiseCheb, Tolerance,
};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Surface area of the unit sphere `S^{m}` in ℝ^{m+1}; `|S^0| = 2`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf((m as f64 + 1.0) / 2.0) / gamma_half(m + 1)
}

/// Volume of the unit ball in ℝ^n.
pub fn ball_volume(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n + 2)
}

/// Γ(m/2) for integer m ≥ 1.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1);
    let (mut g, mut x) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while x < m as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// ⟨x⟩ = (1 + x²)^{1/2}.
pub fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// User-supplied profile; tail handling needs its decay exponent and support radius.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub f: RealFn,
    pub df: Option<RealFn>,
    pub n0: f64,
    pub n1: f64,
    pub upsilon: f64,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("CustomProfile")
            .field("name", &self.name)
            .field("n0", &self.n0)
            .field("n1", &self.n1)
            .field("upsilon", &self.upsilon)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum ProfileKind {
    /// f(e) = exp(−e/scale)
    Gaussian { scale: f64 },
    /// f(e) = 1 for e < Υ², 0 otherwise
    FermiZeroT { upsilon: f64 },
    /// f(e) = (1 − e/Υ²)^s on e < Υ²
    SmoothBump { upsilon: f64, smoothness: f64 },
    /// f(e) = (1 + e)^{−n₁}
    PowerDecay { n1: f64 },
    Custom(CustomProfile),
}

/// Radial equilibrium `e ↦ f(e)` with its regularity and decay metadata.
#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    pub kind: ProfileKind,
    pub d: usize,
    pub n0: f64,
    pub n1: f64,
    pub upsilon: f64,
    /// Constant in `|f(e)| ≤ C⟨e⟩^{−n₁}`.
    pub c_decay: f64,
    /// When set, regularity/decay relations are reported as failures rather than warnings.
    pub strict_assumptions: bool,
}

impl EquilibriumProfile {
    pub fn new(kind: ProfileKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension d must be at least 1".into()));
        }
        let inf = f64::INFINITY;
        let (n0, n1, upsilon) = match &kind {
            ProfileKind::Gaussian { scale } => {
                if !(*scale > 0.0) {
                    return Err(Error::InvalidInput("Gaussian scale must be positive".into()));
                }
                (inf, inf, inf)
            }
            ProfileKind::FermiZeroT { upsilon } => {
                check_radius(*upsilon)?;
                (0.0, inf, *upsilon)
            }
            ProfileKind::SmoothBump {
                upsilon,
                smoothness,
            } => {
                check_radius(*upsilon)?;
                if !(*smoothness > 0.0) {
                    return Err(Error::InvalidInput("bump smoothness must be positive".into()));
                }
                // (1 − x)^s is C^{⌈s⌉−1} at the edge (C^∞ for integer s only inside)
                let reg = if smoothness.fract() == 0.0 {
                    smoothness - 1.0
                } else {
                    smoothness.floor()
                };
                (reg, inf, *upsilon)
            }
            ProfileKind::PowerDecay { n1 } => {
                if !(*n1 > 0.0) {
                    return Err(Error::InvalidInput("decay exponent n1 must be positive".into()));
                }
                (inf, *n1, inf)
            }
            ProfileKind::Custom(c) => {
                if !(c.upsilon > 0.0) {
                    return Err(Error::InvalidInput("custom profile needs a positive support radius".into()));
                }
                (c.n0, c.n1, c.upsilon)
            }
        };
        Ok(EquilibriumProfile {
            kind,
            d,
            n0,
            n1,
            upsilon,
            c_decay: 1.0,
            strict_assumptions: false,
        })
    }

    pub fn gaussian(d: usize) -> Self {
        Self::new(ProfileKind::Gaussian { scale: 1.0 }, d).expect("valid")
    }

    pub fn fermi(d: usize, upsilon: f64) -> Self {
        Self::new(ProfileKind::FermiZeroT { upsilon }, d).expect("valid")
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ProfileKind::Gaussian { .. } => "gaussian".into(),
            ProfileKind::FermiZeroT { .. } => "fermi_zero_t".into(),
            ProfileKind::SmoothBump { .. } => "smooth_bump".into(),
            ProfileKind::PowerDecay { .. } => "power_decay".into(),
            ProfileKind::Custom(c) => c.name.clone(),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.upsilon.is_finite()
    }

    /// f(e) for e ≥ 0 (values for e < 0 are clamped to e = 0).
    pub fn f(&self, e: f64) -> f64 {
        let e = e.max(0.0);
        match &self.kind {
            ProfileKind::Gaussian { scale } => (-e / scale).exp(),
            ProfileKind::FermiZeroT { upsilon } => {
                if e < upsilon * upsilon {
                    1.0
                } else {
                    0.0
                }
            }
            ProfileKind::SmoothBump {
                upsilon,
                smoothness,
            } => {
                let x = 1.0 - e / (upsilon * upsilon);
                if x > 0.0 {
                    x.powf(*smoothness)
                } else {
                    0.0
                }
            }
            ProfileKind::PowerDecay { n1 } => (1.0 + e).powf(-n1),
            ProfileKind::Custom(c) => (c.f)(e),
        }
    }

    /// f′(e) where the kind provides it in closed form.
    pub fn df(&self, e: f64) -> Option<f64> {
        let e = e.max(0.0);
        match &self.kind {
            ProfileKind::Gaussian { scale } => Some(-(-e / scale).exp() / scale),
            ProfileKind::FermiZeroT { .. } => None,
            ProfileKind::SmoothBump {
                upsilon,
                smoothness,
            } => {
                let u2 = upsilon * upsilon;
                let x = 1.0 - e / u2;
                if x > 0.0 {
                    Some(-smoothness / u2 * x.powf(smoothness - 1.0))
                } else {
                    Some(0.0)
                }
            }
            ProfileKind::PowerDecay { n1 } => Some(-n1 * (1.0 + e).powf(-n1 - 1.0)),
            ProfileKind::Custom(c) => c.df.as_ref().map(|g| g(e)),
        }
    }

    /// ∫_{ℝ^d} f(|p|²) dp as a radial integral.
    pub fn total_mass(&self) -> Result<f64> {
        let d = self.d;
        let area = sphere_area(d - 1);
        let g = |r: f64| self.f(r * r) * r.powi(d as i32 - 1);
        let tol = Tolerance::new(1e-14).with_rel(1e-13);
        if self.is_compact() {
            Ok(area * integrate(g, 0.0, self.upsilon, tol)?.value.re)
        } else {
            Ok(area * halfline_real(&g, 1.0, tol)?)
        }
    }
}

fn check_radius(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput("support radius must be finite and positive".into()))
    }
}

/// ∫_0^∞ g over dyadic shells `[0, r0], [r0, 2r0], …` until the shells stop mattering.
fn halfline_real(g: &dyn Fn(f64) -> f64, r0: f64, tol: Tolerance) -> Result<f64> {
    let mut total = integrate(g, 0.0, r0, tol)?.value.re;
    let mut lo = r0;
    let mut prev = f64::INFINITY;
    for _ in 0..80 {
        let hi = 2.0 * lo;
        let piece = integrate(g, lo, hi, tol)?.value.re;
        total += piece;
        let small = piece.abs() <= 1e-15 * total.abs().max(1e-300);
        if small && prev.abs() <= 1e-13 * total.abs().max(1e-300) {
            return Ok(total);
        }
        if piece.abs() < prev.abs() && prev.is_finite() && piece.abs() > 0.0 {
            let q = piece.abs() / prev.abs();
            if q < 0.9 && piece.abs() * q / (1.0 - q) <= 1e-13 * total.abs() {
                return Ok(total + piece * q / (1.0 - q));
            }
        }
        prev = piece;
        lo = hi;
    }
    Err(Error::NonIntegrable {
        at: lo,
        reason: "radial integral does not settle over 80 dyadic shells".into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum PotentialKind {
    /// ŵ(k) = (1 + k²)^{−1}
    ScreenedCoulomb,
    /// ŵ(k) = g
    Delta { coupling: f64 },
    /// ŵ(k) = exp(−k² w²)
    GaussianHat { width: f64 },
    Custom { name: String },
}

/// Radial interaction potential on the Fourier side.
#[derive(Clone)]
pub struct Potential {
    pub kind: PotentialKind,
    w: RealFn,
    pub w_hat_zero: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Potential")
            .field("kind", &self.kind)
            .field("w_hat_zero", &self.w_hat_zero)
            .finish()
    }
}

impl Potential {
    pub fn screened_coulomb() -> Self {
        Potential {
            kind: PotentialKind::ScreenedCoulomb,
            w: Arc::new(|k: f64| 1.0 / (1.0 + k * k)),
            w_hat_zero: 1.0,
        }
    }

    pub fn delta(coupling: f64) -> Self {
        Potential {
            kind: PotentialKind::Delta { coupling },
            w: Arc::new(move |_| coupling),
            w_hat_zero: coupling,
        }
    }

    pub fn zero() -> Self {
        Self::delta(0.0)
    }

    pub fn gaussian_hat(width: f64) -> Self {
        Potential {
            kind: PotentialKind::GaussianHat { width },
            w: Arc::new(move |k: f64| (-k * k * width * width).exp()),
            w_hat_zero: 1.0,
        }
    }

    pub fn custom(name: &str, w: RealFn) -> Self {
        let w0 = w(0.0);
        Potential {
            kind: PotentialKind::Custom { name: name.into() },
            w,
            w_hat_zero: w0,
        }
    }

    pub fn w_hat(&self, k: f64) -> f64 {
        (self.w)(k.abs())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Delta { coupling } if coupling == 0.0)
    }
}

/// Even one-dimensional marginal of a radial profile, with its derivative and
/// cosine transform, stored as piecewise Chebyshev tables on `[0, L]`.
#[derive(Clone)]
pub struct Marginal {
    pub d: usize,
    pub upsilon: f64,
    /// φ vanishes (or is treated as vanishing) for |u| ≥ support_radius.
    pub support_radius: f64,
    pub total_mass: f64,
    phi: Arc<PiecewiseCheb<f64>>,
    dphi: Arc<PiecewiseCheb<f64>>,
    d2phi: Arc<PiecewiseCheb<f64>>,
    phi_osc: Arc<OscillatoryIntegrator>,
    uphi_osc: Arc<OscillatoryIntegrator>,
    phi_hat_table: Arc<PiecewiseCheb<f64>>,
    phi_hat_cut: f64,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for Marginal {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Marginal")
            .field("d", &self.d)
            .field("upsilon", &self.upsilon)
            .field("support_radius", &self.support_radius)
            .field("total_mass", &self.total_mass)
            .finish()
    }
}

impl Marginal {
    pub fn phi(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= self.support_radius {
            0.0
        } else {
            self.phi.eval(a)
        }
    }

    /// φ″ from the interpolant of φ′.
    pub fn d2phi(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= self.support_radius {
            0.0
        } else {
            self.d2phi.eval(a)
        }
    }

    /// Beyond this argument |φ̂| is below 1e−15 of the mass; `None` for algebraic decay.
    pub fn phi_hat_decay_radius(&self) -> Option<f64> {
        if self.upsilon.is_finite() {
            None
        } else {
            Some(self.phi_hat_cut)
        }
    }

    pub fn dphi(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= self.support_radius {
            0.0
        } else {
            u.signum() * self.dphi.eval(a)
        }
    }

    /// φ̂(t) = 2∫_0^∞ cos(tu) φ(u) du.
    pub fn phi_hat(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= self.phi_hat_cut {
            self.phi_hat_table.eval(a)
        } else {
            self.phi_hat_direct(a)
        }
    }

    /// φ̂ from the oscillatory integrator, bypassing the φ̂ table.
    pub fn phi_hat_direct(&self, t: f64) -> f64 {
        2.0 * self.phi_osc.integral(t).re
    }

    /// φ̂′(t) = −2∫_0^∞ u sin(tu) φ(u) du.
    pub fn dphi_hat(&self, t: f64) -> f64 {
        let v: Complex64 = self.uphi_osc.integral(t);
        -2.0 * v.im
    }

    /// Symmetric support `(−L, L)` used as the integration domain.
    pub fn support(&self) -> (f64, f64) {
        (-self.support_radius, self.support_radius)
    }

    /// Points in `(−L, L)` where φ may lose smoothness, plus zero.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// ∫ u² φ(u) du, equal to −φ̂″(0).
    pub fn second_moment(&self) -> f64 {
        let tol = Tolerance::new(1e-14).with_rel(1e-13);
        let mut pts: Vec<f64> = self.breakpoints.iter().copied().filter(|&b| b >= 0.0).collect();
        pts.insert(0, 0.0);
        pts.push(self.support_radius);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        2.0 * integrate_points(|u| u * u * self.phi(u), &pts, tol)
            .map(|r| r.value.re)
            .unwrap_or(f64::NAN)
    }

    pub fn phi_table(&self) -> &PiecewiseCheb<f64> {
        &self.phi
    }
}

/// Options for [`build_marginal`].
#[derive(Debug, Clone, Copy)]
pub struct MarginalOptions {
    pub abs_tol: f64,
    /// Tail of φ beyond the truncation radius must carry less than this fraction of the mass.
    pub truncation_tol: f64,
    pub max_radius: f64,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        MarginalOptions {
            abs_tol: 1e-12,
            truncation_tol: 1e-12,
            max_radius: 1e5,
        }
    }
}

/// Builds the marginal of `f` (see [`Marginal`]).
pub fn build_marginal(f: &EquilibriumProfile) -> Result<Marginal> {
    build_marginal_with(f, MarginalOptions::default())
}

pub fn build_marginal_with(f: &EquilibriumProfile, opts: MarginalOptions) -> Result<Marginal> {
    let d = f.d;
    let tol = Tolerance::new(opts.abs_tol * 1e-2).with_rel(1e-13);
    let phi_raw = |u: f64| -> Result<f64> { marginal_point(f, d, u, tol, opts) };
    let phi0 = phi_raw(0.0)?;
    if !(phi0 > 0.0) {
        return Err(Error::NonIntegrable {
            at: 0.0,
            reason: "marginal is not positive at the origin".into(),
        });
    }
    let radius = if f.is_compact() {
        f.upsilon
    } else {
        truncation_radius(&phi_raw, phi0, opts)?
    };
    // dyadic panel boundaries keep algebraic tails well resolved
    let mut pts = vec![0.0];
    let mut b = 0.5f64.min(radius / 2.0);
    while b < radius {
        pts.push(b);
        b *= 2.0;
    }
    pts.push(radius);
    let failure = std::sync::Mutex::new(None);
    let eval = |u: f64| match phi_raw(u) {
        Ok(v) => v,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            0.0
        }
    };
    let cheb_opts = ChebOptions {
        abs_tol: opts.abs_tol * 1e-2,
        rel_tol: 1e-13,
        max_panels: 5000,
        min_width: 1e-9 * radius.max(1.0),
    };
    let phi = PiecewiseCheb::adaptive(&eval, &pts, cheb_opts)?;
    if let Some(e) = failure.lock().unwrap().take() {
        return Err(e);
    }
    let dphi = match derivative_route(f) {
        DerivativeRoute::Lowered => {
            let lower = |u: f64| {
                let v = if d >= 3 {
                    marginal_point(f, d - 2, u, tol, opts)
                } else {
                    Ok(f.f(u * u))
                };
                match v {
                    Ok(v) => -2.0 * std::f64::consts::PI * u * v,
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        0.0
                    }
                }
            };
            PiecewiseCheb::adaptive(&lower, &pts, cheb_opts)?
        }
        DerivativeRoute::UnderIntegral => {
            let df = |u: f64| match marginal_derivative_point(f, d, u, tol) {
                Ok(v) => v,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    0.0
                }
            };
            PiecewiseCheb::adaptive(&df, &pts, cheb_opts)?
        }
        DerivativeRoute::Interpolant => phi.derivative(),
    };
    if let Some(e) = failure.lock().unwrap().take() {
        return Err(e);
    }
    let total_mass = 2.0 * phi.integral();
    let phi_osc = phi.oscillatory();
    let uphi = |u: f64| u * phi.eval(u);
    let uphi_table = PiecewiseCheb::adaptive(&uphi, &pts, cheb_opts)?;
    let uphi_osc = uphi_table.oscillatory();
    // φ̂ table up to a cut where the direct route takes over
    let phi_hat_cut = if f.is_compact() {
        (200.0 / radius).max(50.0)
    } else {
        let mut t = 4.0;
        while t < 400.0 && (2.0 * phi_osc.integral(t).re).abs() > 1e-15 * total_mass {
            t *= 1.5;
        }
        t.max(10.0)
    };
    let mut hat_pts = vec![0.0];
    let mut b = 1.0;
    while b < phi_hat_cut {
        hat_pts.push(b);
        b += 4.0;
    }
    hat_pts.push(phi_hat_cut);
    let hat = |t: f64| 2.0 * phi_osc.integral(t).re;
    let hat_opts = ChebOptions {
        abs_tol: 1e-15 * total_mass,
        rel_tol: 1e-14,
        max_panels: 20_000,
        min_width: 1e-9,
    };
    let phi_hat_table = PiecewiseCheb::adaptive(&hat, &hat_pts, hat_opts)?;
    let breakpoints = if f.is_compact() {
        vec![-f.upsilon, 0.0, f.upsilon]
    } else {
        vec![0.0]
    };
    Ok(Marginal {
        d,
        upsilon: f.upsilon,
        support_radius: radius,
        total_mass,
        phi: Arc::new(phi),
        d2phi: Arc::new(dphi.derivative()),
        dphi: Arc::new(dphi),
        phi_osc: Arc::new(phi_osc),
        uphi_osc: Arc::new(uphi_osc),
        phi_hat_table: Arc::new(phi_hat_table),
        phi_hat_cut,
        breakpoints,
    })
}

enum DerivativeRoute {
    /// φ_d′(u) = −2πu φ_{d−2}(u) (with φ_1 = f(u²)), valid for d ≥ 3
    Lowered,
    /// 2u ∫ f′(u² + r²) … dr with a closed-form f′
    UnderIntegral,
    /// differentiate the Chebyshev interpolant of φ
    Interpolant,
}

fn derivative_route(f: &EquilibriumProfile) -> DerivativeRoute {
    if f.d >= 3 {
        DerivativeRoute::Lowered
    } else if f.df(0.0).is_some() {
        DerivativeRoute::UnderIntegral
    } else {
        DerivativeRoute::Interpolant
    }
}

fn marginal_point(
    f: &EquilibriumProfile,
    d: usize,
    u: f64,
    tol: Tolerance,
    _opts: MarginalOptions,
) -> Result<f64> {
    let u2 = u * u;
    if d == 1 {
        return Ok(f.f(u2));
    }
    let area = sphere_area(d - 2);
    let g = |r: f64| f.f(u2 + r * r) * r.powi(d as i32 - 2);
    let v = if f.is_compact() {
        let ups2 = f.upsilon * f.upsilon;
        if u2 >= ups2 {
            return Ok(0.0);
        }
        integrate(g, 0.0, (ups2 - u2).sqrt(), tol)
            .map_err(|e| non_integrable(u, e))?
            .value
            .re
    } else {
        halfline_real(&g, 1.0, tol).map_err(|e| non_integrable(u, e))?
    };
    Ok(area * v)
}

fn marginal_derivative_point(f: &EquilibriumProfile, d: usize, u: f64, tol: Tolerance) -> Result<f64> {
    let u2 = u * u;
    let df = |e: f64| f.df(e).unwrap_or(0.0);
    if d == 1 {
        return Ok(2.0 * u * df(u2));
    }
    let area = sphere_area(d - 2);
    let g = |r: f64| df(u2 + r * r) * r.powi(d as i32 - 2);
    let v = if f.is_compact() {
        let ups2 = f.upsilon * f.upsilon;
        if u2 >= ups2 {
            return Ok(0.0);
        }
        integrate(g, 0.0, (ups2 - u2).sqrt(), tol)
            .map_err(|e| non_integrable(u, e))?
            .value
            .re
    } else {
        halfline_real(&g, 1.0, tol).map_err(|e| non_integrable(u, e))?
    };
    Ok(2.0 * u * area * v)
}

fn non_integrable(u: f64, e: Error) -> Error {
    match e {
        Error::NonIntegrable { .. } => e,
        other => Error::NonIntegrable {
            at: u,
            reason: other.to_string(),
        },
    }
}

fn truncation_radius(
    phi_raw: &dyn Fn(f64) -> Result<f64>,
    phi0: f64,
    opts: MarginalOptions,
) -> Result<f64> {
    // φ(L)·L bounds the discarded mass for tails decaying faster than 1/u²
    let mut l = 1.0;
    while l < opts.max_radius {
        let v = phi_raw(l)?;
        if v.abs() * l <= opts.truncation_tol * phi0 {
            return Ok(l);
        }
        l *= 1.25;
    }
    log::warn!("marginal truncated at the maximum radius {}", opts.max_radius);
    Ok(opts.max_radius)
}

/// Result of [`shifted_l2_difference`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShiftedL2 {
    pub value: f64,
    pub box_half_width: f64,
    /// Set when g at the box boundary is not negligible.
    pub truncation_warning: bool,
}

/// ∫_{ℝ^d} |g(p − k e₁) − g(p + k e₁)|² dp with g(p) = f(|p|²/4), over a truncated box.
///
/// Reduced to the axial coordinate p₁ and the transverse radius r = |p⊥|
/// (tensorized one-dimensional rules).
pub fn shifted_l2_difference(f: &EquilibriumProfile, k: f64) -> Result<ShiftedL2> {
    let k = k.abs();
    let d = f.d;
    // radius where g becomes negligible
    let reach = if f.is_compact() {
        2.0 * f.upsilon
    } else {
        let mut r = 1.0;
        while f.f(r * r / 4.0) > 1e-18 && r < 1e4 {
            r *= 1.2;
        }
        r
    };
    let b = reach + k;
    let g = |p1: f64, r2: f64| f.f((p1 * p1 + r2) / 4.0);
    let integrand = |p1: f64, r: f64| {
        let r2 = r * r;
        let diff = g(p1 - k, r2) - g(p1 + k, r2);
        diff * diff
    };
    let tol = Tolerance::new(1e-13).with_rel(1e-10);
    let warn_level = g(b, 0.0).max(g(0.0, b * b));
    let value = if d == 1 {
        2.0 * integrate(|p1| integrand(p1, 0.0), 0.0, b, tol)?.value.re
    } else {
        let area = sphere_area(d - 2);
        let inner = |p1: f64| -> f64 {
            integrate(|r| integrand(p1, r) * r.powi(d as i32 - 2), 0.0, b, tol)
                .map(|x| x.value.re)
                .unwrap_or(f64::NAN)
        };
        // integrand is even in p₁
        2.0 * area * integrate(inner, 0.0, b, tol)?.value.re
    };
    if !value.is_finite() {
        return Err(Error::ToleranceNotMet {
            achieved: f64::NAN,
            requested: tol.abs,
            evaluations: 0,
        });
    }
    Ok(ShiftedL2 {
        value,
        box_half_width: b,
        truncation_warning: warn_level > 1e-10,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub status: CheckStatus,
    /// Sample point where the check failed, if any.
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    /// Set for d < 3 where only structural statements are meaningful.
    pub structural_only: bool,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }
}

fn check(name: &str, status: CheckStatus, witness: Option<f64>, detail: String) -> AssumptionCheck {
    AssumptionCheck {
        name: name.into(),
        status,
        witness,
        detail,
    }
}

/// Samples the standing assumptions on `f` and `w`; never fails.
pub fn validate_assumptions(f: &EquilibriumProfile, w: &Potential) -> AssumptionReport {
    let mut checks = Vec::new();
    let e_max = if f.is_compact() {
        f.upsilon * f.upsilon
    } else {
        400.0
    };
    let n = 2000;

    // positivity inside the support and nonnegativity everywhere
    let mut witness = None;
    for i in 0..n {
        let p = if f.is_compact() {
            f.upsilon * i as f64 / n as f64
        } else {
            e_max.sqrt() * i as f64 / n as f64
        };
        let v = f.f(p * p);
        if !(v > 0.0) {
            witness = Some(p);
            break;
        }
    }
    let mut negative = None;
    for i in 0..=n {
        let e = 2.0 * e_max * i as f64 / n as f64;
        if f.f(e) < 0.0 {
            negative = Some(e);
            break;
        }
    }
    checks.push(match (witness, negative) {
        (None, None) => check("A1_positivity", CheckStatus::Pass, None, "f(|p|²) > 0 for |p| < Υ".into()),
        (Some(p), _) => check(
            "A1_positivity",
            CheckStatus::Fail,
            Some(p),
            format!("f(|p|²) = {} at |p| = {p}", f.f(p * p)),
        ),
        (None, Some(e)) => check(
            "A1_positivity",
            CheckStatus::Fail,
            Some(e),
            format!("f(e) < 0 at e = {e}"),
        ),
    });

    // regularity and decay relations
    let d = f.d as f64;
    let reg_ok = f.n0 >= d + 3.0;
    let dec_ok = d <= f.n1 && f.n1 <= (f.n0 + d - 3.0) / 2.0;
    let soft = if f.strict_assumptions {
        CheckStatus::Fail
    } else {
        CheckStatus::Warn
    };
    checks.push(check(
        "A2_regularity",
        if reg_ok { CheckStatus::Pass } else { soft },
        None,
        format!("n0 = {}, needs ≥ d + 3 = {}", f.n0, d + 3.0),
    ));
    checks.push(check(
        "A3_exponents",
        if dec_ok { CheckStatus::Pass } else { soft },
        None,
        format!("n1 = {}, needs d ≤ n1 ≤ (n0 + d − 3)/2", f.n1),
    ));

    // sampled decay |f(e)| ≤ C⟨e⟩^{−n₁} and |f′(e)| ≤ C⟨e⟩^{−n₁−1}
    let mut decay_witness = None;
    if f.n1.is_finite() {
        for i in 0..=n {
            let e = 1e4 * (i as f64 / n as f64).powi(2);
            let bound = f.c_decay * japanese(e).powf(-f.n1);
            let mut bad = f.f(e).abs() > bound * (1.0 + 1e-12);
            if let Some(df) = f.df(e) {
                bad |= df.abs() > f.c_decay * japanese(e).powf(-f.n1 - 1.0) * (1.0 + 1e-12) * f.n1.max(1.0);
            }
            if bad {
                decay_witness = Some(e);
                break;
            }
        }
    }
    checks.push(match decay_witness {
        None => check("A3_decay", CheckStatus::Pass, None, format!("C_decay = {}", f.c_decay)),
        Some(e) => check(
            "A3_decay",
            CheckStatus::Warn,
            Some(e),
            format!("decay bound with C_decay = {} violated at e = {e}", f.c_decay),
        ),
    });

    // potential: ŵ ≥ 0, finite at 0, nonincreasing
    let mut neg = None;
    let mut inc = None;
    let mut prev = w.w_hat(0.0);
    for i in 1..=n {
        let k = 50.0 * (i as f64 / n as f64).powi(2);
        let v = w.w_hat(k);
        if v < 0.0 && neg.is_none() {
            neg = Some(k);
        }
        if v > prev * (1.0 + 1e-12) + 1e-300 && inc.is_none() {
            inc = Some(k);
        }
        prev = v;
    }
    checks.push(if w.w_hat_zero.is_finite() && neg.is_none() {
        check("potential_positive", CheckStatus::Pass, None, format!("ŵ(0) = {}", w.w_hat_zero))
    } else {
        check(
            "potential_positive",
            CheckStatus::Fail,
            neg,
            "ŵ negative or ŵ(0) infinite".into(),
        )
    });
    checks.push(match inc {
        None => check("potential_monotone", CheckStatus::Pass, None, "ŵ nonincreasing".into()),
        Some(k) => check(
            "potential_monotone",
            CheckStatus::Fail,
            Some(k),
            format!("ŵ increases near k = {k}"),
        ),
    });

    // marginal: φ′ < 0 on (0, Υ)
    match build_marginal(f) {
        Ok(m) => {
            let top = if f.is_compact() {
                f.upsilon
            } else {
                m.support_radius.min(8.0)
            };
            let mut bad = None;
            for i in 1..n {
                let u = top * i as f64 / n as f64;
                if m.phi(u) <= 1e-13 * m.phi(0.0) {
                    break;
                }
                if m.dphi(u) >= 0.0 {
                    bad = Some(u);
                    break;
                }
            }
            checks.push(match bad {
                None => check("marginal_decreasing", CheckStatus::Pass, None, "φ′ < 0 on (0, Υ)".into()),
                Some(u) => check(
                    "marginal_decreasing",
                    CheckStatus::Fail,
                    Some(u),
                    format!("φ′({u}) = {}", m.dphi(u)),
                ),
            });
        }
        Err(e) => checks.push(check("marginal_decreasing", CheckStatus::Fail, None, e.to_string())),
    }

    AssumptionReport {
        checks,
        structural_only: f.d < 3,
    }
}
