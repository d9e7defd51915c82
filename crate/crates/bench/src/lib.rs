//! Shared fixtures for the benchmarks.

use hartree_mix::dynamics::{free_trajectory, log_grid, uniform_grid, DensityTrajectory, InitialKernel, TrajectoryMeta};
use hartree_mix::nonlinear::{normalize_kernel, NonlinearConfig};
use hartree_mix::profiles::{build_marginal, EquilibriumProfile, Marginal, Potential};

pub struct Scenario {
    pub marginal: Marginal,
    pub potential: Potential,
    pub profile: EquilibriumProfile,
}

/// Gaussian equilibrium with the screened Coulomb potential.
pub fn gaussian(d: usize) -> Scenario {
    let profile = EquilibriumProfile::gaussian(d);
    Scenario {
        marginal: build_marginal(&profile).expect("gaussian marginal"),
        potential: Potential::screened_coulomb(),
        profile,
    }
}

/// Free Gaussian source on `n_k` radial nodes up to `t_max`.
pub fn free_source(d: usize, n_k: usize, dt: f64, t_max: f64) -> DensityTrajectory {
    let meta = TrajectoryMeta {
        d,
        n1: d as f64 + 1.0,
        n2: d as f64 + 1.0,
    };
    let g0 = InitialKernel::gaussian(d, 1.0, 1.0);
    free_trajectory(&g0, &log_grid(1e-3, 10.0, n_k), &uniform_grid(dt, t_max), meta).expect("free trajectory")
}

/// A small d = 1 nonlinear setup and its rescaled initial kernel.
pub fn small_nonlinear() -> (NonlinearConfig, InitialKernel) {
    let cfg = NonlinearConfig {
        n_pts: 17,
        box_half_width: 4.0,
        dt: 0.1,
        t_max: 3.0,
        ..NonlinearConfig::for_dimension(1)
    };
    let g0 = normalize_kernel(&InitialKernel::gaussian(1, 1.0, 0.25), 1e-2, &cfg);
    (cfg, g0)
}
