//! Half-line Laplace–Fourier transforms and inverse Fourier synthesis on a line.

use num_complex::Complex64;

use super::chebyshev::{ChebOptions, OscillatoryIntegrator, PiecewiseCheb};
use super::special::oscillatory_tail_moments;
use super::QuadResult;
use crate::error::Result;

/// Tabulated `q(t) = e^{−γt} g(t)` on `[0, t_max]` for fixed `γ = Re λ ≥ 0`,
/// reusable for every `Im λ`.
#[derive(Debug, Clone)]
pub struct LaplaceFourierTable {
    gamma: f64,
    t_max: f64,
    osc: OscillatoryIntegrator,
    interp_error: f64,
    tail_bound: f64,
    evaluations: usize,
}

impl LaplaceFourierTable {
    /// `tail_constant` is C in `|g(t)| ≤ C⟨t⟩^{−2}` for `t ≥ t_max`; `breakpoints`
    /// are optional interior panel boundaries.
    pub fn new<G>(
        g: &G,
        gamma: f64,
        t_max: f64,
        tail_constant: f64,
        breakpoints: &[f64],
        opts: ChebOptions,
    ) -> Result<Self>
    where
        G: Fn(f64) -> Complex64 + ?Sized,
    {
        let mut pts = vec![0.0];
        pts.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < t_max));
        pts.push(t_max);
        let q = |t: f64| g(t) * (-gamma * t).exp();
        let table = PiecewiseCheb::<Complex64>::adaptive(&q, &pts, opts)?;
        let evaluations = table.panels().len() * (super::chebyshev::DEGREE + 1);
        // ∫_{t_max}^∞ C e^{−γt} t^{−2} dt ≤ C e^{−γ t_max} / t_max
        let tail_bound = if t_max > 0.0 {
            tail_constant * (-gamma * t_max).exp() / t_max
        } else {
            f64::INFINITY
        };
        Ok(LaplaceFourierTable {
            gamma,
            t_max,
            interp_error: table.error_proxy(),
            osc: table.oscillatory(),
            tail_bound,
            evaluations,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `∫_0^{t_max} e^{−λt} g(t) dt` with `λ = γ + iω`.
    pub fn eval(&self, omega: f64) -> QuadResult {
        QuadResult {
            value: self.osc.integral(-omega),
            abs_error_estimate: self.interp_error + self.tail_bound,
            evaluations: self.evaluations,
        }
    }
}

/// `∫_0^{t_max} e^{−λt} g(t) dt` for a single λ with `Re λ ≥ 0`.
///
/// The abs_error_estimate includes the interpolation error proxy and the tail
/// bound implied by `|g(t)| ≤ tail_constant·⟨t⟩^{−2}`.
pub fn halfline_laplace_fourier<G>(
    g: &G,
    lambda: Complex64,
    t_max: f64,
    tail_constant: f64,
    opts: ChebOptions,
) -> Result<QuadResult>
where
    G: Fn(f64) -> Complex64 + ?Sized,
{
    let table = LaplaceFourierTable::new(g, lambda.re.max(0.0), t_max, tail_constant, &[], opts)?;
    Ok(table.eval(lambda.im))
}

/// Large-|τ| model for a line integrand.
#[derive(Debug, Clone)]
pub enum TailModel {
    /// `|G(τ)| ≤ c/(a² + τ²)`; only an error bound is produced.
    Lorentzian { c: f64, a: f64 },
    /// `G(τ) ≈ Σ_n plus[n]·τ^{−n}` for τ → +∞ and `Σ_n minus[n]·|τ|^{−n}` for
    /// τ → −∞ (index 0 and 1 unused), with residual bound `remainder·|τ|^{−order}`.
    Asymptotic {
        plus: Vec<Complex64>,
        minus: Vec<Complex64>,
        remainder: f64,
        order: usize,
    },
}

/// Tabulated `G` on `[−τ_max, τ_max]` supporting `(1/2π)∫ e^{iτt} G(τ) dτ` for many t.
#[derive(Debug, Clone)]
pub struct FourierLineTable {
    tau_max: f64,
    osc: OscillatoryIntegrator,
    interp_error: f64,
    tail: TailModel,
    evaluations: usize,
}

impl FourierLineTable {
    pub fn new<G>(
        g: &G,
        tau_max: f64,
        breakpoints: &[f64],
        tail: TailModel,
        opts: ChebOptions,
    ) -> Result<Self>
    where
        G: Fn(f64) -> Complex64 + ?Sized,
    {
        let mut pts = vec![-tau_max];
        pts.extend(
            breakpoints
                .iter()
                .copied()
                .filter(|&b| b > -tau_max && b < tau_max),
        );
        pts.push(tau_max);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let table = PiecewiseCheb::<Complex64>::adaptive(g, &pts, opts)?;
        Ok(FourierLineTable {
            tau_max,
            interp_error: table.error_proxy(),
            evaluations: table.panels().len() * (super::chebyshev::DEGREE + 1),
            osc: table.oscillatory(),
            tail,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn eval(&self, t: f64) -> QuadResult {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut value = self.osc.integral(t);
        let tail_err;
        match &self.tail {
            TailModel::Lorentzian { c, a } => {
                let a = a.max(f64::MIN_POSITIVE);
                tail_err = 2.0 * c / a * (std::f64::consts::FRAC_PI_2 - (self.tau_max / a).atan());
            }
            TailModel::Asymptotic {
                plus,
                minus,
                remainder,
                order,
            } => {
                let n_max = plus.len().max(minus.len()).saturating_sub(1);
                if n_max >= 1 {
                    let pos = oscillatory_tail_moments(self.tau_max, t, n_max);
                    let neg = oscillatory_tail_moments(self.tau_max, -t, n_max);
                    for n in 1..=n_max {
                        if let Some(c) = plus.get(n) {
                            if c.norm() > 0.0 {
                                value += c * pos[n];
                            }
                        }
                        if let Some(c) = minus.get(n) {
                            if c.norm() > 0.0 {
                                value += c * neg[n];
                            }
                        }
                    }
                }
                let ord = (*order).max(2) as i32;
                tail_err = 2.0 * remainder * self.tau_max.powi(1 - ord) / (ord as f64 - 1.0);
            }
        }
        QuadResult {
            value: value / two_pi,
            abs_error_estimate: (self.interp_error + tail_err) / two_pi,
            evaluations: self.evaluations,
        }
    }
}

/// `(1/2π)∫_{−τ_max}^{τ_max} e^{iτt} G(τ) dτ` plus the analytic tail handling of `tail`.
pub fn inverse_fourier_line<G>(
    g: &G,
    t: f64,
    tau_max: f64,
    tail: TailModel,
    opts: ChebOptions,
) -> Result<QuadResult>
where
    G: Fn(f64) -> Complex64 + ?Sized,
{
    Ok(FourierLineTable::new(g, tau_max, &[], tail, opts)?.eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exponential_laplace_values() {
        let g = |t: f64| c((-t).exp());
        let opts = ChebOptions::default();
        let r = halfline_laplace_fourier(&g, c(0.0), 40.0, 0.0, opts).unwrap();
        assert!((r.value - 1.0).norm() < 1e-12);
        let r = halfline_laplace_fourier(&g, Complex64::new(0.0, 1.0), 40.0, 0.0, opts).unwrap();
        assert!((r.value - 1.0 / Complex64::new(1.0, 1.0)).norm() < 1e-12);
        let zero = |_t: f64| c(0.0);
        let r = halfline_laplace_fourier(&zero, Complex64::new(0.3, 2.0), 10.0, 0.0, opts).unwrap();
        assert_eq!(r.value, c(0.0));
    }

    #[test]
    fn lorentzian_inverse_transform() {
        let g = |tau: f64| c(1.0 / (1.0 + tau * tau));
        let tail = TailModel::Asymptotic {
            plus: vec![c(0.0), c(0.0), c(1.0), c(0.0), c(-1.0), c(0.0), c(1.0)],
            minus: vec![c(0.0), c(0.0), c(1.0), c(0.0), c(-1.0), c(0.0), c(1.0)],
            remainder: 1.0,
            order: 8,
        };
        let table = FourierLineTable::new(&g, 200.0, &[], tail, ChebOptions::default()).unwrap();
        let r0 = table.eval(0.0);
        assert!((r0.value - 0.5).norm() < 1e-12, "{}", r0.value);
        let r2 = table.eval(2.0);
        assert!((r2.value.re - 0.5 * (-2.0f64).exp()).abs() < 1e-12, "{}", r2.value);
        assert!(r2.value.im.abs() < 1e-12);
    }

    #[test]
    fn lorentzian_tail_bound_covers_truncation() {
        let g = |tau: f64| c(1.0 / (1.0 + tau * tau));
        let r = inverse_fourier_line(
            &g,
            0.0,
            50.0,
            TailModel::Lorentzian { c: 1.0, a: 1.0 },
            ChebOptions::default(),
        )
        .unwrap();
        assert!((r.value.re - 0.5).abs() <= r.abs_error_estimate + 1e-12);
    }
}
