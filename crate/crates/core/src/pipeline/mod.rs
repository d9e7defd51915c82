//! Run configuration, decay fits, file output and subcommand dispatch.

pub mod config;
pub mod fit;
pub mod io;
pub mod run;

pub use config::{EquilibriumSpec, Grids, KGrid, NonlinearGrid, PotentialSpec, RunConfig, TGrid, TauGrid, Tolerances};
pub use fit::{fit_decay, y_norm, DecayFit};
pub use run::{exit_code, run, RunOutcome, Stage, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK};
