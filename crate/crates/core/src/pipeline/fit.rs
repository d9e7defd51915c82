//! Log-log decay fits and weighted sup norms.

use serde::{Deserialize, Serialize};

use crate::dynamics::DensityTrajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub samples: usize,
}

impl DecayFit {
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t.ln()).exp()
    }
}

/// Least-squares line through `(ln t, ln v)` for samples with `t` in `window`.
pub fn fit_decay(samples: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidInput(format!("bad fit window [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo && t <= hi)
        .collect();
    if pts.len() < 8 {
        return Err(Error::InsufficientSamples {
            needed: 8,
            found: pts.len(),
        });
    }
    if let Some(&(t, v)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::NonPositiveValue { t, value: v });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        window,
        slope,
        intercept,
        residual,
        samples: pts.len(),
    })
}

/// `sup_{k,t} ⟨kt⟩^{N₁}⟨k⟩^{N₂}|ρ̂ₖ(t)|` over the stored grid.
pub fn y_norm(rho: &DensityTrajectory, n1: f64, n2: f64) -> f64 {
    let mut best = 0.0f64;
    for (k, row) in rho.k_grid.iter().zip(&rho.rho_hat) {
        let wk = (1.0 + k * k).powf(n2 / 2.0);
        for (t, v) in rho.t_grid.iter().zip(row) {
            let kt = k * t;
            best = best.max((1.0 + kt * kt).powf(n1 / 2.0) * wk * v.norm());
        }
    }
    best
}
