//! The symbol m_f, the regular Green symbol G̃ʳ = 1/D − 1 on the imaginary
//! axis, its time-domain inverse Ĝʳₖ(t), and convolution with a source.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{DispersionEvaluator, TimeKernelTable};
use crate::dynamics::{convolve_weighted, DensityTrajectory, TimeRule};
use crate::error::{Error, Result};
use crate::pipeline::fit::{fit_decay, DecayFit};
use crate::profiles::{Marginal, Potential};
use crate::quadrature::{ChebOptions, FourierLineTable, TailModel, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfSample {
    pub lambda: Complex64,
    pub k: f64,
    pub value: Complex64,
}

/// m_f(λ, k) = 2∫_0^∞ e^{−λt} sin(tk²) φ̂(2tk) dt, so that D = 1 + ŵ(k)m_f.
pub fn m_f(m: &Marginal, lambda: Complex64, k: f64) -> Result<MfSample> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput("m_f needs k > 0".into()));
    }
    if lambda.re < 0.0 {
        return Err(Error::InvalidInput("m_f needs Re λ ≥ 0".into()));
    }
    let table = TimeKernelTable::new(m, k, lambda.re)?;
    Ok(MfSample {
        lambda,
        k,
        value: 2.0 * table.laplace(lambda.im).value,
    })
}

fn evaluator<'a>(m: &'a Marginal, w: &'a Potential) -> DispersionEvaluator<'a> {
    DispersionEvaluator::new(m, w).with_tolerance(Tolerance::new(1e-13).with_rel(1e-13))
}

fn symbol(ev: &DispersionEvaluator<'_>, tau: f64, k: f64, theta0: f64) -> Result<Complex64> {
    let d = ev.d_tilde(Complex64::new(0.0, tau / k), k)?.value;
    if d.norm() < 0.5 * theta0 {
        return Err(Error::NearZeroDivisor {
            modulus: d.norm(),
            theta0,
        });
    }
    Ok(1.0 / d - 1.0)
}

/// G̃ʳ(iτ, k) = −ŵ(k)m_f(iτ, k)/D(iτ, k), evaluated as 1/D − 1 with D from the
/// boundary-value dispersion routes. `theta0` is the certified floor of |D̃|.
pub fn green_symbol_regular(m: &Marginal, w: &Potential, tau: f64, k: f64, theta0: f64) -> Result<Complex64> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput("Green symbol needs k > 0".into()));
    }
    if w.w_hat(k) == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    symbol(&evaluator(m, w), tau, k, theta0)
}

/// Leading large-|τ| coefficients of G̃ʳ(iτ, k) ≈ a₂/τ² + c₄/τ⁴.
///
/// With g(t) = 2 sin(tk²)φ̂(2tk): m_f(iτ) ~ −g′(0)/τ² + g‴(0)/τ⁴, where
/// g′(0) = 2k²φ̂(0) and g‴(0) = −2k⁶φ̂(0) + 24k⁴φ̂″(0), φ̂″(0) = −∫u²φ.
pub fn symbol_tail_coefficients(m: &Marginal, w: &Potential, k: f64) -> (f64, f64) {
    let wk = w.w_hat(k);
    let p0 = m.phi_hat(0.0);
    let p2 = -m.second_moment();
    let g1 = 2.0 * k * k * p0;
    let g3 = -2.0 * k.powi(6) * p0 + 24.0 * k.powi(4) * p2;
    (wk * g1, -wk * g3 + wk * wk * g1 * g1)
}

/// Below this |k| the Green symbol is taken from the Laplace table of the time kernel.
pub const SMALL_K: f64 = 0.05;

/// Ĝʳₖ(·) for one k: a Chebyshev table of the symbol on [−τ_max, τ_max] with
/// the τ^{−2}, τ^{−4} tail integrated analytically.
pub struct GreenRow {
    pub k: f64,
    pub tau_max: f64,
    table: Option<FourierLineTable>,
}

impl GreenRow {
    pub fn new(m: &Marginal, w: &Potential, k: f64, theta0: f64) -> Result<Self> {
        if k == 0.0 || w.w_hat(k) == 0.0 {
            return Ok(GreenRow {
                k,
                tau_max: 0.0,
                table: None,
            });
        }
        if k < 0.0 {
            return Err(Error::InvalidInput("k must be nonnegative".into()));
        }
        let ev = evaluator(m, w);
        // below SMALL_K the boundary route loses digits to the 1/(2k) prefactor
        let time_table = if k < SMALL_K {
            Some(TimeKernelTable::new(m, k, 0.0)?)
        } else {
            None
        };
        let wk = w.w_hat(k);
        let symbol = |tau: f64, k: f64, theta0: f64| -> Result<Complex64> {
            match &time_table {
                Some(tb) => {
                    let d = 1.0 + wk * 2.0 * tb.laplace(tau).value;
                    if d.norm() < 0.5 * theta0 {
                        return Err(Error::NearZeroDivisor {
                            modulus: d.norm(),
                            theta0,
                        });
                    }
                    Ok(1.0 / d - 1.0)
                }
                None => symbol(&ev, tau, k, theta0),
            }
        };
        let (a2, c4) = symbol_tail_coefficients(m, w, k);
        let asym = |tau: f64| a2 / (tau * tau) + c4 / tau.powi(4);
        let u_scale = if m.upsilon.is_finite() {
            m.upsilon
        } else {
            6.0 * (m.second_moment() / m.total_mass).sqrt()
        };
        // the symbol varies on the scale k² + 2k·u
        let scale = k * k + 2.0 * k * u_scale;
        let mut tau_max = 20.0 + 8.0 * scale;
        let mut remainder = f64::INFINITY;
        for _ in 0..8 {
            let g = symbol(tau_max, k, theta0)?;
            remainder = 2.0 * (g - asym(tau_max)).norm() * tau_max.powi(6);
            // residual contribution 2R τ^{−5}/5 to the line integral
            if 2.0 * remainder * tau_max.powi(-5) / 5.0 < 1e-10 {
                break;
            }
            tau_max *= 2.0;
        }
        let mut bps = vec![0.0];
        if m.upsilon.is_finite() {
            let u = m.upsilon;
            for s in [2.0 * u - k, 2.0 * u + k] {
                if s > 0.0 {
                    bps.push(k * s);
                    bps.push(-k * s);
                }
            }
        }
        let n = 16;
        for i in 1..n {
            let x = tau_max * i as f64 / n as f64;
            bps.push(x);
            bps.push(-x);
        }
        let f = |tau: f64| symbol(tau, k, theta0).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let coef = |c: f64| Complex64::new(c, 0.0);
        let tail = TailModel::Asymptotic {
            plus: vec![coef(0.0), coef(0.0), coef(a2), coef(0.0), coef(c4)],
            minus: vec![coef(0.0), coef(0.0), coef(a2), coef(0.0), coef(c4)],
            remainder,
            order: 6,
        };
        let opts = ChebOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_panels: 20_000,
            min_width: 1e-9 * tau_max,
        };
        // surface failures of the symbol (e.g. NearZeroDivisor) before tabulating
        symbol(0.0, k, theta0)?;
        let table = FourierLineTable::new(&f, tau_max, &bps, tail, opts)?;
        Ok(GreenRow {
            k,
            tau_max,
            table: Some(table),
        })
    }

    /// Ĝʳₖ(t) = (1/2π)∫ e^{iτt} G̃ʳ(iτ, k) dτ.
    pub fn eval(&self, t: f64) -> Complex64 {
        match &self.table {
            Some(tb) => tb.eval(t).value,
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// Ĝʳₖ(t) at a single point.
pub fn green_time(m: &Marginal, w: &Potential, k: f64, t: f64, theta0: f64) -> Result<Complex64> {
    Ok(GreenRow::new(m, w, k, theta0)?.eval(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenTable {
    pub k_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `values[ik][it]`.
    pub values: Vec<Vec<Complex64>>,
    pub tau_max_used: f64,
    pub theta0: f64,
}

impl GreenTable {
    /// Assembled in parallel over k; the k = 0 row is identically zero.
    pub fn build(m: &Marginal, w: &Potential, k_grid: &[f64], t_grid: &[f64], theta0: f64) -> Result<Self> {
        let rows: Vec<Result<(f64, Vec<Complex64>)>> = k_grid
            .par_iter()
            .map(|&k| {
                let row = GreenRow::new(m, w, k, theta0)?;
                Ok((row.tau_max, t_grid.iter().map(|&t| row.eval(t)).collect()))
            })
            .collect();
        let mut values = Vec::with_capacity(k_grid.len());
        let mut tau_max_used = 0.0f64;
        for r in rows {
            let (tm, v) = r?;
            tau_max_used = tau_max_used.max(tm);
            values.push(v);
        }
        Ok(GreenTable {
            k_grid: k_grid.to_vec(),
            t_grid: t_grid.to_vec(),
            values,
            tau_max_used,
            theta0,
        })
    }

    /// Largest |Im Ĝʳ| over the table.
    pub fn max_imag(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }
}

/// ρ̂ₖ(t) = Ŝₖ(t) + ∫_0^t Ĝʳₖ(t − s)Ŝₖ(s) ds per k.
pub fn convolve_green(g: &GreenTable, s: &DensityTrajectory) -> Result<DensityTrajectory> {
    convolve_green_with(g, s, TimeRule::default())
}

pub fn convolve_green_with(g: &GreenTable, s: &DensityTrajectory, rule: TimeRule) -> Result<DensityTrajectory> {
    if g.k_grid != s.k_grid {
        return Err(Error::GridMismatch("Green table and source use different k grids".into()));
    }
    if g.t_grid.len() < s.t_grid.len() || g.t_grid[..s.t_grid.len()] != s.t_grid[..] {
        return Err(Error::GridMismatch("Green table and source use different t grids".into()));
    }
    let h = s.dt()?;
    let mut out = s.clone();
    out.rho_hat = g
        .values
        .par_iter()
        .zip(&s.rho_hat)
        .map(|(gk, sk)| {
            let c = convolve_weighted(gk, sk, h, rule);
            sk.iter().zip(c).map(|(a, b)| a + b).collect()
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub k: f64,
    /// Log-log fit of the block maxima of |Ĝʳₖ(t)| that lie above `floor`.
    /// When fewer than 8 blocks do, the slope is the chord from the peak of
    /// |Ĝʳₖ| to the first block below the floor, an upper bound for the
    /// envelope's slope.
    pub fit: DecayFit,
    pub floor_limited: bool,
    /// Roundoff floor of the inversion, 1e−12 · max|Ĝʳₖ|.
    pub floor: f64,
    /// Smallest C with |Ĝʳₖ(t)| ≤ C|k|⟨kt⟩^{−4} on the sampled grid.
    pub constant: f64,
    pub max_abs: f64,
    pub blocks: Vec<(f64, f64)>,
}

/// Envelope of one table row over `window`: maxima of |Ĝʳ| on the sub-blocks
/// `[t₀2^{j/4}, t₀2^{(j+1)/4}]`, fitted in log-log.
pub fn envelope_fit(k: f64, t_grid: &[f64], row: &[Complex64], window: (f64, f64)) -> Result<EnvelopeFit> {
    let mut blocks = Vec::new();
    let mut lo = window.0;
    let ratio = 2f64.powf(0.25);
    while lo < window.1 * (1.0 - 1e-12) {
        let hi = (lo * ratio).min(window.1);
        let mut best = (0.0f64, f64::NAN);
        for (t, v) in t_grid.iter().zip(row) {
            if *t >= lo && *t <= hi && v.norm() >= best.0 {
                best = (v.norm(), *t);
            }
        }
        if best.1.is_finite() {
            blocks.push((best.1, best.0));
        }
        lo = hi;
    }
    let mut constant = 0.0f64;
    let mut peak = (0.0f64, 0.0f64);
    for (t, v) in t_grid.iter().zip(row) {
        let kt = k * t;
        if v.norm() > peak.1 {
            peak = (*t, v.norm());
        }
        if k > 0.0 {
            constant = constant.max(v.norm() * (1.0 + kt * kt).powi(2) / k);
        }
    }
    let max_abs = peak.1;
    let floor = 1e-12 * max_abs;
    let above: Vec<(f64, f64)> = blocks.iter().copied().filter(|b| b.1 > floor).collect();
    let (fit, floor_limited) = if above.len() >= 8 || blocks.len() == above.len() {
        (fit_decay(&above, window)?, false)
    } else {
        let first = blocks.iter().find(|b| b.1 <= floor).copied().unwrap_or(blocks[0]);
        let t0 = peak.0.max(t_grid.get(1).copied().unwrap_or(1e-3)).min(first.0 * 0.5);
        let slope = (floor / max_abs).ln() / (first.0 / t0).ln();
        (
            DecayFit {
                window: (t0, first.0),
                slope,
                intercept: max_abs.ln() - slope * t0.ln(),
                residual: 0.0,
                samples: 2,
            },
            true,
        )
    };
    Ok(EnvelopeFit {
        k,
        fit,
        floor_limited,
        floor,
        constant,
        max_abs,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::dispersion_time_integral;
    use crate::profiles::{build_marginal, EquilibriumProfile};

    #[test]
    fn mf_matches_dispersion() {
        let m = build_marginal(&EquilibriumProfile::gaussian(3)).unwrap();
        let w = Potential::screened_coulomb();
        for &(lr, li, k) in &[(0.3, 1.0, 0.7), (0.0, 2.0, 1.5), (1.0, -0.5, 0.2)] {
            let l = Complex64::new(lr, li);
            let mf = m_f(&m, l, k).unwrap().value;
            let d = dispersion_time_integral(&m, &w, l, k).unwrap().value;
            assert!((1.0 + w.w_hat(k) * mf - d).norm() < 1e-8);
        }
    }

    #[test]
    fn symbol_conjugate_symmetric() {
        let m = build_marginal(&EquilibriumProfile::gaussian(3)).unwrap();
        let w = Potential::screened_coulomb();
        for &tau in &[0.3, 2.0, 7.5] {
            let a = green_symbol_regular(&m, &w, tau, 1.0, 0.1).unwrap();
            let b = green_symbol_regular(&m, &w, -tau, 1.0, 0.1).unwrap();
            assert!((a - b.conj()).norm() < 1e-10);
        }
        assert_eq!(green_symbol_regular(&m, &Potential::zero(), 1.0, 1.0, 0.1).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn tail_coefficients_match_symbol() {
        let m = build_marginal(&EquilibriumProfile::gaussian(3)).unwrap();
        let w = Potential::screened_coulomb();
        let k = 1.0;
        let (a2, c4) = symbol_tail_coefficients(&m, &w, k);
        let tau = 400.0;
        let g = green_symbol_regular(&m, &w, tau, k, 0.1).unwrap();
        let r = (g.re - a2 / (tau * tau) - c4 / tau.powi(4)).abs();
        assert!(r * tau.powi(6) < 1e3 * a2.abs().max(1.0) * 1e3, "{r}");
    }

    #[test]
    fn green_time_is_real_and_zero_for_zero_potential() {
        let m = build_marginal(&EquilibriumProfile::gaussian(3)).unwrap();
        let w = Potential::screened_coulomb();
        let row = GreenRow::new(&m, &w, 1.0, 0.1).unwrap();
        for &t in &[0.0, 0.5, 3.0, 20.0] {
            assert!(row.eval(t).im.abs() < 1e-8);
        }
        assert_eq!(green_time(&m, &Potential::zero(), 1.0, 2.0, 0.1).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn green_row_is_resolvent_of_kernel() {
        // Gʳ + K + K*Gʳ = 0 (the resolvent identity of ρ + K*ρ = S)
        let m = build_marginal(&EquilibriumProfile::gaussian(3)).unwrap();
        let w = Potential::screened_coulomb();
        let k = 1.0;
        let h = 0.02;
        let n = 400;
        let row = GreenRow::new(&m, &w, k, 0.1).unwrap();
        let g: Vec<Complex64> = (0..n).map(|i| row.eval(i as f64 * h)).collect();
        let kern: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(crate::dynamics::volterra_kernel(&m, &w, k, i as f64 * h), 0.0))
            .collect();
        let c = convolve_weighted(&kern, &g, h, TimeRule::Gregory);
        let worst = (0..n).map(|i| (g[i] + kern[i] + c[i]).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
    }
}
