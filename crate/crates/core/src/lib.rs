pub mod error;
pub mod quadrature;
pub mod profiles;
pub mod dispersion;
pub mod stability;
pub mod dynamics;
pub mod green;
pub mod nonlinear;
pub mod pipeline;

pub use error::{Error, Result};

pub use dispersion::{DispersionEvaluator, DispersionSample, Route};
pub use dynamics::{
    free_density, free_trajectory, volterra_solve, volterra_solve_with, DensityTrajectory, GaussianTerm, InitialKernel,
    KernelKind, TimeRule, TrajectoryMeta,
};
pub use green::{convolve_green, envelope_fit, EnvelopeFit, GreenTable};
pub use nonlinear::{solve_selfconsistent, KernelState, Lattice, NonlinearConfig, NormTracker, SelfConsistentRun};
pub use pipeline::{fit_decay, DecayFit, RunConfig, Stage};
pub use profiles::{build_marginal, EquilibriumProfile, Marginal, Potential, ProfileKind};
pub use stability::{certify, CriterionValue, ScanConfig, StabilityCertificate, Verdict};
