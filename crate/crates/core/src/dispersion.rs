//! The dispersion relation `D(λ, k)` and its rescaling `D̃(λ̃, k) = D(λ̃|k|, k)`.
//!
//! Routes:
//! - Hilbert form: `1 + ŵ/(2k)[H((−iλ + k²)/(2k)) − H((−iλ − k²)/(2k))]`,
//!   `H(z) = ∫ φ(u)/(z − u) du`, for `Re λ > 0`;
//! - time-integral form: `1 + 2ŵ∫_0^∞ e^{−λt} sin(tk²) φ̂(2tk) dt`, for `Re λ ≥ 0`;
//! - boundary values on `λ̃ = iτ̃` from principal values plus the residue term;
//! - the real branch `|τ̃| ≥ 2Υ + k` for compactly supported φ;
//! - the `k = 0` limit, which only exists in rescaled variables.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{Marginal, Potential};
use crate::quadrature::{
    cauchy_integral, integrate_points, pv_integral, ChebOptions, LaplaceFourierTable,
    PVIntegrand, QuadResult, Tolerance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    HilbertForm,
    TimeIntegralForm,
    PlemeljBoundary,
    RealBranch,
    KZeroLimit,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::HilbertForm => "hilbert",
            Route::TimeIntegralForm => "time_integral",
            Route::PlemeljBoundary => "plemelj",
            Route::RealBranch => "real_branch",
            Route::KZeroLimit => "k_zero",
        }
    }
}

/// One value of the dispersion relation.
///
/// `lambda` is the unscaled spectral parameter (`λ̃·k`); for `k = 0` it is zero
/// and only `lambda_tilde` carries information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSample {
    pub lambda: Complex64,
    pub lambda_tilde: Complex64,
    pub k_mag: f64,
    pub value: Complex64,
    pub route: Route,
    pub error_estimate: f64,
}

const QUANTUM: f64 = 1e-4;

/// Memo of `H(z)` keyed by z on a 1e−4 lattice. Only exact hits in z are
/// returned; the lattice just buckets the lookups.
#[derive(Debug, Default)]
pub struct HilbertTransformCache {
    memo: Mutex<HashMap<(i64, i64), Vec<(Complex64, QuadResult)>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl HilbertTransformCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(z: Complex64) -> (i64, i64) {
        ((z.re / QUANTUM).round() as i64, (z.im / QUANTUM).round() as i64)
    }

    pub fn get_or_insert_with<F>(&self, z: Complex64, compute: F) -> Result<QuadResult>
    where
        F: FnOnce() -> Result<QuadResult>,
    {
        let key = Self::key(z);
        if let Some(bucket) = self.memo.lock().unwrap().get(&key) {
            if let Some((_, r)) = bucket.iter().find(|(w, _)| *w == z) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(*r);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let r = compute()?;
        self.memo
            .lock()
            .unwrap()
            .entry(key)
            .or_default()
            .push((z, r));
        Ok(r)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.memo.lock().unwrap().values().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Local exponent α in φ(Υ − δ) ≈ c δ^α, fitted over the last six dyadic shells.
pub fn endpoint_exponent(m: &Marginal) -> f64 {
    let ups = m.upsilon;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 8..14 {
        let delta = ups * 0.5f64.powi(j);
        let v = m.phi(ups - delta);
        if v > 0.0 {
            xs.push(delta.ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 2 {
        return f64::INFINITY;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Tabulated `q(t) = e^{−γt} sin(tk²) φ̂(2tk)` on a truncated half-line for one (k, γ);
/// evaluates `∫_0^∞ e^{−(γ+iω)t} sin(tk²) φ̂(2tk) dt` for any ω.
#[derive(Debug, Clone)]
pub struct TimeKernelTable {
    pub k: f64,
    pub gamma: f64,
    table: LaplaceFourierTable,
}

impl TimeKernelTable {
    pub fn new(m: &Marginal, k: f64, gamma: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidInput("time-integral route needs k > 0".into()));
        }
        if gamma < 0.0 {
            return Err(Error::InvalidInput("time-integral route needs Re λ ≥ 0".into()));
        }
        let mut t_max = match m.phi_hat_decay_radius() {
            Some(s) => s / (2.0 * k),
            None => 4000.0 / k.max(1e-3),
        };
        if gamma > 0.0 {
            t_max = t_max.min(37.0 / gamma);
        }
        let g = |t: f64| Complex64::new((t * k * k).sin() * m.phi_hat(2.0 * t * k), 0.0);
        // tail constant in |g(t)| ≤ C⟨t⟩^{−2} sampled beyond t_max
        let mut c = 0.0f64;
        for i in 0..64 {
            let t = t_max * (1.0 + 3.0 * i as f64 / 63.0);
            c = c.max(g(t).norm() * (1.0 + t * t));
        }
        let scale = m.total_mass.abs().max(1e-300);
        let opts = ChebOptions {
            abs_tol: 1e-15 * scale,
            rel_tol: 1e-14,
            max_panels: 200_000,
            min_width: 1e-10 * t_max,
        };
        let n_init = 32usize;
        let pts: Vec<f64> = (1..n_init).map(|i| t_max * i as f64 / n_init as f64).collect();
        let table = LaplaceFourierTable::new(&g, gamma, t_max, 2.0 * c, &pts, opts)?;
        Ok(TimeKernelTable { k, gamma, table })
    }

    /// `∫_0^∞ e^{−(γ+iω)t} sin(tk²) φ̂(2tk) dt`.
    pub fn laplace(&self, omega: f64) -> QuadResult {
        self.table.eval(omega)
    }

    pub fn t_max(&self) -> f64 {
        self.table.t_max()
    }
}

/// Evaluator holding the marginal, the potential, tolerances and a private H(z) memo.
pub struct DispersionEvaluator<'a> {
    pub marginal: &'a Marginal,
    pub potential: &'a Potential,
    pub tol: Tolerance,
    cache: HilbertTransformCache,
}

impl<'a> DispersionEvaluator<'a> {
    pub fn new(marginal: &'a Marginal, potential: &'a Potential) -> Self {
        DispersionEvaluator {
            marginal,
            potential,
            tol: Tolerance::new(1e-11).with_rel(1e-12),
            cache: HilbertTransformCache::new(),
        }
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn cache(&self) -> &HilbertTransformCache {
        &self.cache
    }

    fn support_for(&self, x: f64) -> (f64, f64) {
        let m = self.marginal;
        if m.upsilon.is_finite() {
            m.support()
        } else {
            // φ vanishes beyond the truncation radius; widen so x is never on an edge
            let r = m.support_radius.max(x.abs() + 1.0);
            (-r, r)
        }
    }

    /// H(z) = ∫ φ(u)/(z − u) du for z off the real axis.
    pub fn hilbert(&self, z: Complex64) -> Result<QuadResult> {
        if z.im == 0.0 {
            return Err(Error::InvalidInput("H(z) needs Im z ≠ 0; use the boundary routes".into()));
        }
        let m = self.marginal;
        self.cache.get_or_insert_with(z, || {
            let support = self.support_for(z.re);
            cauchy_integral(
                &|u: f64| m.phi(u),
                &|u: f64| m.dphi(u),
                z,
                support,
                m.breakpoints(),
                self.tol,
            )
        })
    }

    /// PV ∫ φ(u)/(x − u) du.
    pub fn pv(&self, x: f64) -> Result<QuadResult> {
        let m = self.marginal;
        let phi = |u: f64| m.phi(u);
        let support = self.support_for(x);
        pv_integral(
            &PVIntegrand::new(&phi, x, support),
            support,
            m.breakpoints(),
            self.tol,
        )
    }

    fn pv_dphi(&self, x: f64) -> Result<QuadResult> {
        let m = self.marginal;
        let dphi = |u: f64| m.dphi(u);
        let support = self.support_for(x);
        pv_integral(
            &PVIntegrand::new(&dphi, x, support),
            support,
            m.breakpoints(),
            self.tol,
        )
    }

    /// D(λ, k) via the Cauchy-integral form; needs Re λ > 0 and k > 0.
    pub fn hilbert_form(&self, lambda: Complex64, k: f64) -> Result<DispersionSample> {
        if !(lambda.re > 0.0) || !(k > 0.0) {
            return Err(Error::InvalidInput(
                "Hilbert route needs Re λ > 0 and k > 0".into(),
            ));
        }
        let lt = lambda / k;
        let mut s = self.rescaled_hilbert(lt, k)?;
        s.route = Route::HilbertForm;
        Ok(s)
    }

    fn rescaled_hilbert(&self, lt: Complex64, k: f64) -> Result<DispersionSample> {
        let w = self.potential.w_hat(k);
        let sample = |value: Complex64, err: f64| DispersionSample {
            lambda: lt * k,
            lambda_tilde: lt,
            k_mag: k,
            value,
            route: Route::HilbertForm,
            error_estimate: err,
        };
        if w == 0.0 {
            return Ok(sample(Complex64::new(1.0, 0.0), 0.0));
        }
        let mi = Complex64::new(0.0, -1.0);
        let zp = (mi * lt + k) / 2.0;
        let zm = (mi * lt - k) / 2.0;
        let hp = self.hilbert(zp)?;
        let hm = self.hilbert(zm)?;
        let pre = w / (2.0 * k);
        Ok(sample(
            1.0 + pre * (hp.value - hm.value),
            pre * (hp.abs_error_estimate + hm.abs_error_estimate),
        ))
    }

    /// D(λ, k) via the Laplace transform of the time kernel; Re λ ≥ 0, k > 0.
    pub fn time_integral_form(&self, lambda: Complex64, k: f64) -> Result<DispersionSample> {
        if lambda.re < 0.0 || !(k > 0.0) {
            return Err(Error::InvalidInput(
                "time-integral route needs Re λ ≥ 0 and k > 0".into(),
            ));
        }
        let w = self.potential.w_hat(k);
        let mut out = DispersionSample {
            lambda,
            lambda_tilde: lambda / k,
            k_mag: k,
            value: Complex64::new(1.0, 0.0),
            route: Route::TimeIntegralForm,
            error_estimate: 0.0,
        };
        if w == 0.0 {
            return Ok(out);
        }
        let table = TimeKernelTable::new(self.marginal, k, lambda.re)?;
        let r = table.laplace(lambda.im);
        out.value = 1.0 + 2.0 * w * r.value;
        out.error_estimate = 2.0 * w * r.abs_error_estimate;
        Ok(out)
    }

    /// D̃(iτ̃, k) from principal values plus the residue term; needs k > 0 and
    /// |τ̃| < 2Υ + k.
    pub fn plemelj(&self, tau_tilde: f64, k: f64) -> Result<DispersionSample> {
        if !(k > 0.0) {
            return Err(Error::InvalidInput("boundary route needs k > 0".into()));
        }
        let m = self.marginal;
        if tau_tilde.abs() >= 2.0 * m.upsilon + k {
            return Err(Error::InvalidInput(
                "|τ̃| ≥ 2Υ + k lies on the real branch".into(),
            ));
        }
        let w = self.potential.w_hat(k);
        let lt = Complex64::new(0.0, tau_tilde);
        let mut out = DispersionSample {
            lambda: lt * k,
            lambda_tilde: lt,
            k_mag: k,
            value: Complex64::new(1.0, 0.0),
            route: Route::PlemeljBoundary,
            error_estimate: 0.0,
        };
        if w == 0.0 {
            return Ok(out);
        }
        let xp = (tau_tilde + k) / 2.0;
        let xm = (tau_tilde - k) / 2.0;
        let pp = self.pv(xp)?;
        let pm = self.pv(xm)?;
        let pre = w / (2.0 * k);
        let re = 1.0 + pre * (pp.value.re - pm.value.re);
        let im = std::f64::consts::PI * pre * (m.phi(xp) - m.phi(xm));
        out.value = Complex64::new(re, im);
        out.error_estimate = pre * (pp.abs_error_estimate + pm.abs_error_estimate);
        Ok(out)
    }

    /// D̃(iτ̃, k) for |τ̃| ≥ 2Υ + k, where it is real and even in τ̃.
    pub fn real_branch(&self, tau_tilde: f64, k: f64) -> Result<DispersionSample> {
        let m = self.marginal;
        let ups = m.upsilon;
        if !ups.is_finite() {
            return Err(Error::InvalidInput("real branch needs a compactly supported marginal".into()));
        }
        let tau = tau_tilde.abs();
        if tau < 2.0 * ups + k || k < 0.0 {
            return Err(Error::InvalidInput("real branch needs |τ̃| ≥ 2Υ + k".into()));
        }
        let w = self.potential.w_hat(k);
        let lt = Complex64::new(0.0, tau_tilde);
        let mut out = DispersionSample {
            lambda: lt * k,
            lambda_tilde: lt,
            k_mag: k,
            value: Complex64::new(1.0, 0.0),
            route: Route::RealBranch,
            error_estimate: 0.0,
        };
        if w == 0.0 {
            return Ok(out);
        }
        let xm = (tau - k) / 2.0;
        let xp = (tau + k) / 2.0;
        let at_edge = |x: f64| (x - ups).abs() <= 1e-12 * ups;
        let poles_at_edge = at_edge(xm) as i32 + at_edge(xp) as i32;
        if poles_at_edge > 0 {
            let alpha = endpoint_exponent(m);
            if alpha <= poles_at_edge as f64 - 1.0 + 1e-3 {
                return Err(Error::DivergentIntegral { exponent: alpha });
            }
        }
        let r = integrate_points(
            |u| m.phi(u) / ((xm - u) * (xp - u)),
            &[-ups, 0.0, ups],
            self.tol,
        )?;
        out.value = Complex64::new(1.0 - 0.5 * w * r.value.re, 0.0);
        out.error_estimate = 0.5 * w * r.abs_error_estimate;
        Ok(out)
    }

    /// D̃(λ̃, 0) = 1 + (ŵ(0)/2)∫ φ′(u)/(−iλ̃/2 − u) du, with boundary values on Re λ̃ = 0.
    pub fn k_zero(&self, lambda_tilde: Complex64) -> Result<DispersionSample> {
        if lambda_tilde.re < 0.0 {
            return Err(Error::InvalidInput("k = 0 route needs Re λ̃ ≥ 0".into()));
        }
        let m = self.marginal;
        let w0 = self.potential.w_hat_zero;
        let mut out = DispersionSample {
            lambda: Complex64::new(0.0, 0.0),
            lambda_tilde,
            k_mag: 0.0,
            value: Complex64::new(1.0, 0.0),
            route: Route::KZeroLimit,
            error_estimate: 0.0,
        };
        if w0 == 0.0 {
            return Ok(out);
        }
        if lambda_tilde.re > 0.0 {
            let z = Complex64::new(0.0, -1.0) * lambda_tilde / 2.0;
            let support = self.support_for(z.re);
            let r = cauchy_integral(
                &|u: f64| m.dphi(u),
                &|u: f64| m.d2phi(u),
                z,
                support,
                m.breakpoints(),
                self.tol,
            )?;
            out.value = 1.0 + 0.5 * w0 * r.value;
            out.error_estimate = 0.5 * w0 * r.abs_error_estimate;
            return Ok(out);
        }
        let x = lambda_tilde.im / 2.0;
        if m.upsilon.is_finite() && x.abs() >= m.upsilon {
            let ups = m.upsilon;
            if (x.abs() - ups).abs() <= 1e-12 * ups {
                let alpha = endpoint_exponent(m);
                // φ′ ~ (Υ − u)^{α − 1}
                if alpha - 1.0 <= 1e-3 {
                    return Err(Error::DivergentIntegral { exponent: alpha });
                }
            }
            let r = integrate_points(|u| m.dphi(u) / (x - u), &[-ups, 0.0, ups], self.tol)?;
            out.value = Complex64::new(1.0 + 0.5 * w0 * r.value.re, 0.0);
            out.error_estimate = 0.5 * w0 * r.abs_error_estimate;
            return Ok(out);
        }
        let r = self.pv_dphi(x)?;
        out.value = Complex64::new(
            1.0 + 0.5 * w0 * r.value.re,
            0.5 * std::f64::consts::PI * w0 * m.dphi(x),
        );
        out.error_estimate = 0.5 * w0 * r.abs_error_estimate;
        Ok(out)
    }

    /// D̃(λ̃, k) on the closed right half-plane, routed automatically:
    /// k = 0 → k-zero limit; Re λ̃ > 0 → Hilbert form; Re λ̃ = 0 → boundary or real branch.
    pub fn d_tilde(&self, lambda_tilde: Complex64, k: f64) -> Result<DispersionSample> {
        if k == 0.0 {
            return self.k_zero(lambda_tilde);
        }
        if lambda_tilde.re > 0.0 {
            return self.rescaled_hilbert(lambda_tilde, k);
        }
        if lambda_tilde.re < 0.0 {
            return Err(Error::InvalidInput("Re λ̃ < 0 is outside the domain".into()));
        }
        let tau = lambda_tilde.im;
        if self.marginal.upsilon.is_finite() && tau.abs() >= 2.0 * self.marginal.upsilon + k {
            self.real_branch(tau, k)
        } else {
            self.plemelj(tau, k)
        }
    }
}

pub fn dispersion_hilbert(m: &Marginal, w: &Potential, lambda: Complex64, k: f64) -> Result<DispersionSample> {
    DispersionEvaluator::new(m, w).hilbert_form(lambda, k)
}

pub fn dispersion_time_integral(
    m: &Marginal,
    w: &Potential,
    lambda: Complex64,
    k: f64,
) -> Result<DispersionSample> {
    DispersionEvaluator::new(m, w).time_integral_form(lambda, k)
}

pub fn dispersion_plemelj(m: &Marginal, w: &Potential, tau_tilde: f64, k: f64) -> Result<DispersionSample> {
    DispersionEvaluator::new(m, w).plemelj(tau_tilde, k)
}

pub fn dispersion_real_branch(
    m: &Marginal,
    w: &Potential,
    tau_tilde: f64,
    k: f64,
) -> Result<DispersionSample> {
    DispersionEvaluator::new(m, w).real_branch(tau_tilde, k)
}

pub fn dispersion_k_zero(m: &Marginal, w: &Potential, lambda_tilde: Complex64) -> Result<DispersionSample> {
    DispersionEvaluator::new(m, w).k_zero(lambda_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_marginal, EquilibriumProfile};

    fn gaussian() -> Marginal {
        build_marginal(&EquilibriumProfile::gaussian(3)).unwrap()
    }

    #[test]
    fn zero_coupling_gives_one() {
        let m = gaussian();
        let w = Potential::zero();
        let l = Complex64::new(1.0, 0.5);
        assert_eq!(dispersion_hilbert(&m, &w, l, 1.0).unwrap().value, Complex64::new(1.0, 0.0));
        assert_eq!(dispersion_time_integral(&m, &w, l, 1.0).unwrap().value, Complex64::new(1.0, 0.0));
        assert_eq!(dispersion_plemelj(&m, &w, 0.3, 1.0).unwrap().value, Complex64::new(1.0, 0.0));
        assert_eq!(dispersion_k_zero(&m, &w, l).unwrap().value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn hilbert_and_time_routes_agree() {
        let m = gaussian();
        let w = Potential::screened_coulomb();
        let ev = DispersionEvaluator::new(&m, &w);
        for &(l, k) in &[
            (Complex64::new(1.0, 0.0), 1.0),
            (Complex64::new(0.05, 2.0), 0.7),
            (Complex64::new(3.0, -4.0), 2.5),
        ] {
            let a = ev.hilbert_form(l, k).unwrap();
            let b = ev.time_integral_form(l, k).unwrap();
            assert!((a.value - b.value).norm() < 1e-8, "λ={l}, k={k}: {} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let m = gaussian();
        let w = Potential::screened_coulomb();
        let ev = DispersionEvaluator::new(&m, &w);
        let l = Complex64::new(0.4, 1.3);
        let a = ev.time_integral_form(l, 0.8).unwrap().value;
        let b = ev.time_integral_form(l.conj(), 0.8).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-13);
        let a = ev.hilbert_form(l, 0.8).unwrap().value;
        let b = ev.hilbert_form(l.conj(), 0.8).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn boundary_value_at_origin_is_real_and_at_least_one() {
        let m = gaussian();
        let w = Potential::screened_coulomb();
        for &k in &[0.1, 1.0, 4.0] {
            let s = dispersion_plemelj(&m, &w, 0.0, k).unwrap();
            assert!(s.value.im.abs() < 1e-14);
            assert!(s.value.re >= 1.0);
        }
    }

    #[test]
    fn plemelj_matches_time_route_on_the_axis() {
        let m = gaussian();
        let w = Potential::screened_coulomb();
        let ev = DispersionEvaluator::new(&m, &w);
        for &(tt, k) in &[(0.5, 1.0), (-2.0, 0.4), (3.1, 2.0)] {
            let a = ev.plemelj(tt, k).unwrap().value;
            let b = ev.time_integral_form(Complex64::new(0.0, tt * k), k).unwrap().value;
            assert!((a - b).norm() < 1e-8, "τ̃={tt}, k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn k_zero_boundary_is_real_at_origin() {
        let m = gaussian();
        let w = Potential::screened_coulomb();
        let s = dispersion_k_zero(&m, &w, Complex64::new(0.0, 0.0)).unwrap();
        assert!(s.value.im.abs() < 1e-14 && s.value.re >= 1.0);
        // 1 − (ŵ(0)/2) PV∫φ′/u with φ′/u = −2π e^{−u²} gives 1 + π^{3/2}
        let exact = 1.0 + std::f64::consts::PI.powf(1.5);
        assert!((s.value.re - exact).abs() < 1e-9, "{}", s.value.re);
    }

    #[test]
    fn real_branch_is_even_and_real() {
        let m = build_marginal(&EquilibriumProfile::fermi(5, 1.0)).unwrap();
        let w = Potential::delta(0.1);
        let a = dispersion_real_branch(&m, &w, 3.5, 0.5).unwrap();
        let b = dispersion_real_branch(&m, &w, -3.5, 0.5).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.value.im, 0.0);
    }

    #[test]
    fn fermi_d3_real_branch_edge_is_finite_but_k_zero_edge_diverges() {
        let m = build_marginal(&EquilibriumProfile::fermi(3, 1.0)).unwrap();
        let w = Potential::delta(1.0);
        assert!(dispersion_real_branch(&m, &w, 2.5, 0.5).is_ok());
        let e = dispersion_k_zero(&m, &w, Complex64::new(0.0, 2.0)).unwrap_err();
        assert!(matches!(e, Error::DivergentIntegral { .. }));
        assert!((endpoint_exponent(&m) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn cache_returns_exact_hits_only() {
        let m = gaussian();
        let w = Potential::screened_coulomb();
        let ev = DispersionEvaluator::new(&m, &w);
        let z = Complex64::new(0.3, -0.2);
        let a = ev.hilbert(z).unwrap();
        let b = ev.hilbert(z).unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.cache().hits(), 1);
        let c = ev.hilbert(z + 1e-6).unwrap();
        assert_ne!(a.value, c.value);
        assert_eq!(ev.cache().misses(), 2);
    }
}
