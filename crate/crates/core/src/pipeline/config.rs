//! Run configuration: one JSON document per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{log_grid, uniform_grid, InitialKernel, KernelKind, TimeRule, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::nonlinear::NonlinearConfig;
use crate::profiles::{EquilibriumProfile, Potential, ProfileKind};
use crate::stability::ScanConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquilibriumSpec {
    Gaussian {
        #[serde(default = "one")]
        scale: f64,
    },
    FermiZeroT {
        upsilon: f64,
    },
    SmoothBump {
        upsilon: f64,
        smoothness: f64,
    },
    PowerDecay {
        n1: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl EquilibriumSpec {
    pub fn build(&self, d: usize) -> Result<EquilibriumProfile> {
        let kind = match *self {
            EquilibriumSpec::Gaussian { scale } => ProfileKind::Gaussian { scale },
            EquilibriumSpec::FermiZeroT { upsilon } => ProfileKind::FermiZeroT { upsilon },
            EquilibriumSpec::SmoothBump { upsilon, smoothness } => ProfileKind::SmoothBump { upsilon, smoothness },
            EquilibriumSpec::PowerDecay { n1 } => ProfileKind::PowerDecay { n1 },
        };
        EquilibriumProfile::new(kind, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    ScreenedCoulomb,
    Delta { coupling: f64 },
    GaussianHat { width: f64 },
    Zero,
}

impl PotentialSpec {
    pub fn build(&self) -> Potential {
        match *self {
            PotentialSpec::ScreenedCoulomb => Potential::screened_coulomb(),
            PotentialSpec::Delta { coupling } => Potential::delta(coupling),
            PotentialSpec::GaussianHat { width } => Potential::gaussian_hat(width),
            PotentialSpec::Zero => Potential::zero(),
        }
    }
}

/// Geometric radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KGrid {
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for KGrid {
    fn default() -> Self {
        KGrid {
            count: 160,
            min: 1e-4,
            max: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TGrid {
    pub dt: f64,
    pub t_max: f64,
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid { dt: 0.05, t_max: 100.0 }
    }
}

/// Imaginary-axis scan extent for the stability certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauGrid {
    pub max: f64,
    pub count: usize,
}

impl Default for TauGrid {
    fn default() -> Self {
        TauGrid { max: 200.0, count: 800 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearGrid {
    pub box_half_width: f64,
    pub points: usize,
    pub dt: f64,
    pub t_max: f64,
}

impl Default for NonlinearGrid {
    fn default() -> Self {
        let d = NonlinearConfig::default();
        NonlinearGrid {
            box_half_width: d.box_half_width,
            points: d.n_pts,
            dt: d.dt,
            t_max: d.t_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub k: KGrid,
    pub t: TGrid,
    pub tau: TauGrid,
    pub nonlinear: NonlinearGrid,
    /// Wavenumbers sampled by the dispersion and Green stages.
    pub probe_k: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            k: KGrid::default(),
            t: TGrid::default(),
            tau: TauGrid::default(),
            nonlinear: NonlinearGrid::default(),
            probe_k: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative Y-norm distance at which the Picard iteration stops.
    pub picard: f64,
    pub picard_max_iter: usize,
    /// Largest admissible ε surrogate of the initial kernel.
    pub eps_max: f64,
    pub leakage_limit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = NonlinearConfig::default();
        Tolerances {
            picard: d.tol,
            picard_max_iter: d.max_iter,
            eps_max: d.eps_max,
            leakage_limit: d.leakage_limit,
        }
    }
}

fn default_initial() -> KernelKind {
    KernelKind::GaussianPure {
        amplitude: 1.0,
        alpha: 1.0,
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_fit_window() -> (f64, f64) {
    (5.0, 50.0)
}

fn default_green_window() -> (f64, f64) {
    (2.0, 100.0)
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equilibrium: EquilibriumSpec,
    pub potential: PotentialSpec,
    pub d: usize,
    /// Defaults to `2n₁ − d + 1` when the profile has finite decay order n₁, else `d + 1`.
    #[serde(default)]
    pub n1: Option<f64>,
    /// Defaults to `d + 1`.
    #[serde(default)]
    pub n2: Option<f64>,
    #[serde(default = "default_initial")]
    pub initial: KernelKind,
    /// Rescale the initial kernel so its ε surrogate equals this value.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub time_rule: TimeRule,
    #[serde(default = "default_fit_window")]
    pub fit_window: (f64, f64),
    #[serde(default = "default_green_window")]
    pub green_window: (f64, f64),
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn n1(&self) -> f64 {
        self.n1.unwrap_or_else(|| {
            let n1 = match self.equilibrium {
                EquilibriumSpec::PowerDecay { n1 } => n1,
                _ => f64::INFINITY,
            };
            if n1.is_finite() {
                2.0 * n1 - self.d as f64 + 1.0
            } else {
                self.d as f64 + 1.0
            }
        })
    }

    pub fn n2(&self) -> f64 {
        self.n2.unwrap_or(self.d as f64 + 1.0)
    }

    /// `N₃ = min{N₁, N₂} − d − 1`.
    pub fn n3(&self) -> f64 {
        self.n1().min(self.n2()) - self.d as f64 - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("field `{field}`: {msg}")));
        if self.d == 0 {
            return bad("d", "must be at least 1".into());
        }
        if self.n3() < 0.0 {
            return bad("n1", format!("N3 = min(N1, N2) - d - 1 = {} is negative", self.n3()));
        }
        let g = &self.grids;
        if g.k.count == 0 {
            return bad("grids.k.count", "must be positive".into());
        }
        if !(g.k.min > 0.0 && g.k.min < g.k.max) {
            return bad("grids.k", format!("need 0 < min < max, got [{}, {}]", g.k.min, g.k.max));
        }
        if !(g.t.dt > 0.0) || !(g.t.t_max > g.t.dt) {
            return bad("grids.t", format!("need 0 < dt < t_max, got dt = {}, t_max = {}", g.t.dt, g.t.t_max));
        }
        if g.probe_k.is_empty() || g.probe_k.iter().any(|&k| !(k > 0.0)) {
            return bad("grids.probe_k", "must be a nonempty list of positive wavenumbers".into());
        }
        if g.tau.count == 0 || !(g.tau.max > 0.0) {
            return bad("grids.tau", "count and max must be positive".into());
        }
        let nl = &g.nonlinear;
        if !(nl.dt > 0.0) || !(nl.t_max > nl.dt) {
            return bad("grids.nonlinear", format!("need 0 < dt < t_max, got dt = {}, t_max = {}", nl.dt, nl.t_max));
        }
        if nl.points < 3 || nl.points % 2 == 0 {
            return bad("grids.nonlinear.points", format!("must be odd and at least 3, got {}", nl.points));
        }
        if !(nl.box_half_width > 0.0) {
            return bad("grids.nonlinear.box_half_width", "must be positive".into());
        }
        for (name, w) in [("fit_window", self.fit_window), ("green_window", self.green_window)] {
            if !(w.0 > 0.0 && w.0 < w.1) {
                return bad(name, format!("need 0 < lo < hi, got [{}, {}]", w.0, w.1));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) {
                return bad("epsilon", "must be nonnegative".into());
            }
        }
        self.equilibrium.build(self.d).map_err(|e| Error::Config(format!("field `equilibrium`: {e}")))?;
        Ok(())
    }

    pub fn profile(&self) -> Result<EquilibriumProfile> {
        self.equilibrium.build(self.d)
    }

    pub fn potential(&self) -> Potential {
        self.potential.build()
    }

    pub fn meta(&self) -> TrajectoryMeta {
        TrajectoryMeta {
            d: self.d,
            n1: self.n1(),
            n2: self.n2(),
        }
    }

    pub fn k_grid(&self) -> Vec<f64> {
        log_grid(self.grids.k.min, self.grids.k.max, self.grids.k.count)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        uniform_grid(self.grids.t.dt, self.grids.t.t_max)
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            n_tau: self.grids.tau.count,
            tau_cap: self.grids.tau.max,
            ..ScanConfig::default()
        }
    }

    pub fn nonlinear_config(&self) -> NonlinearConfig {
        let g = &self.grids.nonlinear;
        let t = &self.tolerances;
        NonlinearConfig {
            n_pts: g.points,
            box_half_width: g.box_half_width,
            dt: g.dt,
            t_max: g.t_max,
            tol: t.picard,
            max_iter: t.picard_max_iter,
            n1: self.n1(),
            n2: self.n2(),
            delta: self.delta,
            rule: self.time_rule,
            eps_max: t.eps_max,
            leakage_limit: t.leakage_limit,
            fit_window: self.fit_window,
        }
    }

    /// Initial kernel, rescaled to `epsilon` on the nonlinear lattice when set.
    pub fn initial_kernel(&self) -> Result<InitialKernel> {
        let g0 = match &self.initial {
            KernelKind::GaussianPure { amplitude, alpha } => InitialKernel::gaussian(self.d, *amplitude, *alpha),
            KernelKind::SeparableSum { terms } => InitialKernel::separable(self.d, terms.clone()),
            KernelKind::GridCustom { name, .. } => {
                return Err(Error::Config(format!(
                    "field `initial`: custom kernel `{name}` cannot be declared in a config file"
                )))
            }
        };
        Ok(match self.epsilon {
            Some(eps) => crate::nonlinear::normalize_kernel(&g0, eps, &self.nonlinear_config()),
            None => g0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "equilibrium": {"kind": "gaussian"},
        "potential": {"kind": "screened_coulomb"},
        "d": 3
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.n1(), 4.0);
        assert_eq!(c.n2(), 4.0);
        assert_eq!(c.n3(), 0.0);
        assert_eq!(c.grids.nonlinear.points, 33);
        assert_eq!(c.fit_window, (5.0, 50.0));
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn missing_field_is_named() {
        let err = RunConfig::from_json(r#"{"equilibrium": {"kind": "gaussian"}, "d": 3}"#).unwrap_err();
        assert!(err.to_string().contains("potential"), "{err}");
    }

    #[test]
    fn power_decay_sets_n1() {
        let c = RunConfig::from_json(
            r#"{"equilibrium": {"kind": "power_decay", "n1": 5}, "potential": {"kind": "zero"}, "d": 3}"#,
        )
        .unwrap();
        assert_eq!(c.n1(), 8.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = r#"{"equilibrium": {"kind": "gaussian"}, "potential": {"kind": "zero"}, "d": 3,
                      "grids": {"t": {"dt": 0.0}}}"#;
        assert!(RunConfig::from_json(bad).unwrap_err().to_string().contains("grids.t"));
        let bad = r#"{"equilibrium": {"kind": "gaussian"}, "potential": {"kind": "zero"}, "d": 3, "n2": 2}"#;
        assert!(RunConfig::from_json(bad).unwrap_err().to_string().contains("N3"));
        let bad = r#"{"equilibrium": {"kind": "fermi_zero_t", "upsilon": -1}, "potential": {"kind": "zero"}, "d": 3}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }
}
