//! Numerical integration engine: adaptive Gauss–Kronrod, piecewise Chebyshev
//! interpolation with oscillatory moments, principal values, Cauchy integrals,
//! and half-line / full-line Fourier-type transforms.

mod chebyshev;
mod gauss;
mod principal;
mod special;
mod transforms;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use chebyshev::{ChebOptions, OscillatoryIntegrator, Panel, PiecewiseCheb, Scalar, DEGREE};
pub use gauss::{
    adaptive_points, gauss_legendre, integrate, integrate_complex, integrate_complex_points,
    integrate_points,
};
pub use principal::{cauchy_integral, pv_integral, PVIntegrand, BOUNDARY_EPS};
pub use special::{oscillatory_tail_moments, si_ci};
pub use transforms::{
    halfline_laplace_fourier, inverse_fourier_line, FourierLineTable, LaplaceFourierTable,
    TailModel,
};

/// Value of an integral with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

/// Stopping rule for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evaluations: usize,
}

impl Tolerance {
    pub fn new(abs: f64) -> Self {
        Tolerance {
            abs,
            ..Tolerance::default()
        }
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 0.0,
            max_evaluations: 2_000_000,
        }
    }
}
