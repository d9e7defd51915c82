//! Stage dispatch for the command-line driver.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::fit::{fit_decay, DecayFit};
use super::io::{fmt_f64, read_csv, read_json, write_csv, write_json, write_trajectory_csv};
use crate::dispersion::DispersionEvaluator;
use crate::dynamics::{free_trajectory, reconstruct_sup_norm, volterra_solve_with, DensityTrajectory};
use crate::error::{Error, Result};
use crate::green::{envelope_fit, GreenTable};
use crate::nonlinear::{scattering_diagnostic, solve_selfconsistent};
use crate::profiles::{build_marginal, shifted_l2_difference, validate_assumptions, Marginal};
use crate::stability::{certify, phi_curve, tail_constants, StabilityCertificate, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Marginal,
    Dispersion,
    Stability,
    Green,
    Free,
    Linear,
    Nonlinear,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Marginal,
        Stage::Dispersion,
        Stage::Stability,
        Stage::Green,
        Stage::Free,
        Stage::Linear,
        Stage::Nonlinear,
        Stage::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Marginal => "marginal",
            Stage::Dispersion => "dispersion",
            Stage::Stability => "stability",
            Stage::Green => "green",
            Stage::Free => "free",
            Stage::Linear => "linear",
            Stage::Nonlinear => "nonlinear",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

/// Exit code for a finished or failed stage.
pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(o) => o.exit_code,
        Err(Error::Inconclusive { .. }) => EXIT_INCONCLUSIVE,
        Err(_) => EXIT_ERROR,
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    artifacts: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, v)
    }

    fn done(self, exit_code: i32, summary: String) -> RunOutcome {
        RunOutcome {
            exit_code,
            artifacts: self.artifacts,
            summary,
        }
    }
}

/// Runs one stage, writing its artifacts under `cfg.output_dir`.
pub fn run(cfg: &RunConfig, stage: Stage) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let started = Instant::now();
    let mut ctx = Ctx {
        cfg,
        dir: &cfg.output_dir,
        artifacts: Vec::new(),
    };
    let out = match stage {
        Stage::Marginal => stage_marginal(&mut ctx)?,
        Stage::Dispersion => stage_dispersion(&mut ctx)?,
        Stage::Stability => stage_stability(&mut ctx)?,
        Stage::Green => stage_green(&mut ctx)?,
        Stage::Free => stage_trajectory(&mut ctx, false)?,
        Stage::Linear => stage_trajectory(&mut ctx, true)?,
        Stage::Nonlinear => stage_nonlinear(&mut ctx)?,
        Stage::Report => stage_report(&mut ctx)?,
    };
    let outcome = ctx.done(out.0, out.1);
    log::info!(
        "stage {stage} finished in {:.2}s with exit code {}",
        started.elapsed().as_secs_f64(),
        outcome.exit_code
    );
    Ok(outcome)
}

fn marginal(cfg: &RunConfig) -> Result<Marginal> {
    build_marginal(&cfg.profile()?)
}

fn stage_marginal(ctx: &mut Ctx<'_>) -> Result<(i32, String)> {
    let cfg = ctx.cfg;
    let f = cfg.profile()?;
    let m = build_marginal(&f)?;
    let w = cfg.potential();
    let l = m.support_radius;
    let n = 401;
    let rows = (0..n).map(|i| {
        let u = l * i as f64 / (n - 1) as f64;
        vec![fmt_f64(u), fmt_f64(m.phi(u)), fmt_f64(m.dphi(u))]
    });
    write_csv(&ctx.path("marginal_phi.csv"), &["u", "phi", "dphi"], rows)?;
    let t_hi = m.phi_hat_decay_radius().unwrap_or(50.0).min(200.0);
    let rows = (0..n).map(|i| {
        let t = t_hi * i as f64 / (n - 1) as f64;
        vec![fmt_f64(t), fmt_f64(m.phi_hat(t))]
    });
    write_csv(&ctx.path("marginal_phi_hat.csv"), &["t", "phi_hat"], rows)?;

    let (tail_a, tail_b) = tail_constants(&m);
    let mut shifted = Vec::new();
    for k in [0.05, 0.1, 0.5, 1.0, 2.0] {
        let s = shifted_l2_difference(&f, k)?;
        shifted.push(json!({"k": k, "value": s.value, "ratio_to_k2": s.value / (k * k),
                            "truncation_warning": s.truncation_warning}));
    }
    let assumptions = validate_assumptions(&f, &w);
    ctx.json(
        "marginal.json",
        &json!({
            "profile": f.name(),
            "d": f.d,
            "total_mass": m.total_mass,
            "upsilon": m.upsilon,
            "support_radius": l,
            "second_moment": m.second_moment(),
            "tail_constants": [tail_a, tail_b],
            "shifted_l2": shifted,
            "assumptions": assumptions,
        }),
    )?;
    Ok((
        EXIT_OK,
        format!("marginal: mass {:.6e}, support radius {l:.4}, assumptions pass: {}", m.total_mass, assumptions.all_pass()),
    ))
}

fn stage_dispersion(ctx: &mut Ctx<'_>) -> Result<(i32, String)> {
    let cfg = ctx.cfg;
    let m = marginal(cfg)?;
    let w = cfg.potential();
    let ev = DispersionEvaluator::new(&m, &w);
    let span = if m.upsilon.is_finite() { 2.0 * m.upsilon + 3.0 } else { 6.0 };
    let n_tau = 81;
    let mut rows = Vec::new();
    let mut min_mod = f64::INFINITY;
    for &k in &cfg.grids.probe_k {
        for gamma in [0.0, 0.5] {
            for i in 0..n_tau {
                let tau = -span + 2.0 * span * i as f64 / (n_tau - 1) as f64;
                let s = ev.d_tilde(Complex64::new(gamma, tau), k)?;
                min_mod = min_mod.min(s.value.norm());
                rows.push(vec![
                    fmt_f64(k),
                    fmt_f64(s.lambda.re),
                    fmt_f64(s.lambda.im),
                    s.route.as_str().to_string(),
                    fmt_f64(s.value.re),
                    fmt_f64(s.value.im),
                    fmt_f64(s.error_estimate),
                ]);
            }
        }
    }
    let n = rows.len();
    write_csv(
        &ctx.path("dispersion.csv"),
        &["k", "re_lambda", "im_lambda", "route", "re_D", "im_D", "err"],
        rows,
    )?;
    ctx.json("dispersion.json", &json!({"samples": n, "min_modulus": min_mod}))?;
    Ok((EXIT_OK, format!("dispersion: {n} samples, min |D| = {min_mod:.4e}")))
}

/// Certificate, or the error when the scan cannot certify.
fn certificate(cfg: &RunConfig, m: &Marginal) -> Result<StabilityCertificate> {
    certify(m, &cfg.potential(), &cfg.scan_config())
}

fn stage_stability(ctx: &mut Ctx<'_>) -> Result<(i32, String)> {
    let cfg = ctx.cfg;
    let m = marginal(cfg)?;
    let w = cfg.potential();
    if m.upsilon.is_finite() {
        let ks: Vec<f64> = (0..=100).map(|i| 0.05 * i as f64 * m.upsilon).collect();
        let curve = phi_curve(&m, &w, &ks)?;
        let rows = curve.samples.iter().map(|&(k, v)| vec![fmt_f64(k), fmt_f64(v)]);
        write_csv(&ctx.path("phi_curve.csv"), &["k", "phi"], rows)?;
    }
    match certificate(cfg, &m) {
        Ok(c) => {
            if let Some(s) = &c.scan_summary {
                let rows = s.per_k.iter().map(|&(k, v)| vec![fmt_f64(k), fmt_f64(v)]);
                write_csv(&ctx.path("stability_scan.csv"), &["k", "min_modulus"], rows)?;
            }
            let summary = match c.theta0() {
                Some(t) => format!("stability: stable, theta0 = {t:.4e}"),
                None => format!("stability: {:?}", c.verdict),
            };
            let zero = match &c.verdict {
                Verdict::Unstable { tau_tilde, k, .. } => Some((*tau_tilde, *k)),
                Verdict::CriterionDiverges { zero, .. } => *zero,
                Verdict::Stable { .. } => None,
            };
            ctx.json(
                "stability.json",
                &json!({
                    "verdict": c.verdict,
                    "phi0": c.phi0,
                    "theta0": c.theta0(),
                    "zero": zero.map(|(tau_tilde, k)| json!({"tau_tilde": tau_tilde, "k": k})),
                    "scan_summary": c.scan_summary,
                    "winding_checks": c.winding_checks,
                    "note": c.note,
                }),
            )?;
            Ok((EXIT_OK, summary))
        }
        Err(Error::Inconclusive { minimum, margin }) => {
            ctx.json(
                "stability.json",
                &json!({"verdict": {"kind": "inconclusive"}, "min_modulus": minimum, "margin": margin}),
            )?;
            Ok((
                EXIT_INCONCLUSIVE,
                format!("stability: inconclusive, min |D| = {minimum:.4e}, margin {margin:.4e}"),
            ))
        }
        Err(e) => Err(e),
    }
}

/// θ₀ for stages that need the resolvent; `Err(Inconclusive)` propagates.
fn theta0(cfg: &RunConfig, m: &Marginal) -> Result<f64> {
    let c = certificate(cfg, m)?;
    c.theta0()
        .ok_or_else(|| Error::InvalidInput(format!("equilibrium is not certified stable: {:?}", c.verdict)))
}

fn stage_green(ctx: &mut Ctx<'_>) -> Result<(i32, String)> {
    let cfg = ctx.cfg;
    let m = marginal(cfg)?;
    let w = cfg.potential();
    let th = match theta0(cfg, &m) {
        Ok(t) => t,
        Err(Error::Inconclusive { minimum, .. }) => {
            return Ok((EXIT_INCONCLUSIVE, format!("green: stability inconclusive (min |D| = {minimum:.4e})")))
        }
        Err(e) => return Err(e),
    };
    let t_grid = cfg.t_grid();
    let table = GreenTable::build(&m, &w, &cfg.grids.probe_k, &t_grid, th)?;
    let rows = table.k_grid.iter().zip(&table.values).flat_map(|(&k, row)| {
        t_grid
            .iter()
            .zip(row)
            .map(move |(&t, g)| vec![fmt_f64(k), fmt_f64(t), fmt_f64(g.re), fmt_f64(g.im)])
    });
    write_csv(&ctx.path("green.csv"), &["k", "t", "re_G", "im_G"], rows)?;
    let fits = table
        .k_grid
        .iter()
        .zip(&table.values)
        .map(|(&k, row)| envelope_fit(k, &t_grid, row, cfg.green_window))
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<String> = fits.iter().map(|f| format!("{:.2}", f.fit.slope)).collect();
    ctx.json(
        "green.json",
        &json!({"theta0": th, "tau_max_used": table.tau_max_used, "max_imag": table.max_imag(), "envelopes": fits}),
    )?;
    Ok((EXIT_OK, format!("green: theta0 = {th:.4e}, envelope slopes [{}]", slopes.join(", "))))
}

#[derive(Serialize)]
struct NormFit {
    n: usize,
    fit: Option<DecayFit>,
    error: Option<String>,
}

fn sup_norm_fits(rho: &DensityTrajectory, window: (f64, f64)) -> Result<(Vec<Vec<(f64, f64)>>, Vec<NormFit>)> {
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    for n in 0..3 {
        let c = reconstruct_sup_norm(rho, n)?;
        let fit = fit_decay(&c, window);
        fits.push(NormFit {
            n,
            error: fit.as_ref().err().map(|e| e.to_string()),
            fit: fit.ok(),
        });
        curves.push(c);
    }
    Ok((curves, fits))
}

fn stage_trajectory(ctx: &mut Ctx<'_>, linear: bool) -> Result<(i32, String)> {
    let cfg = ctx.cfg;
    let g0 = cfg.initial_kernel()?;
    let k_grid = cfg.k_grid();
    let t_grid = cfg.t_grid();
    let free = free_trajectory(&g0, &k_grid, &t_grid, cfg.meta())?;
    let (rho, name) = if linear {
        let m = marginal(cfg)?;
        (volterra_solve_with(&m, &cfg.potential(), &free, cfg.time_rule)?, "linear")
    } else {
        (free, "free")
    };
    write_trajectory_csv(&ctx.path(&format!("{name}_density.csv")), &rho)?;
    let (curves, fits) = sup_norm_fits(&rho, cfg.fit_window)?;
    let rows = (0..t_grid.len()).map(|it| {
        vec![
            fmt_f64(t_grid[it]),
            fmt_f64(curves[0][it].1),
            fmt_f64(curves[1][it].1),
            fmt_f64(curves[2][it].1),
        ]
    });
    write_csv(&ctx.path(&format!("{name}_sup_norms.csv")), &["t", "n0", "n1", "n2"], rows)?;
    let slopes: Vec<String> = fits
        .iter()
        .map(|f| f.fit.map_or("n/a".to_string(), |x| format!("{:.3}", x.slope)))
        .collect();
    ctx.json(
        &format!("{name}.json"),
        &json!({"d": cfg.d, "window": cfg.fit_window, "sup_rho": rho.sup_abs(), "fits": fits}),
    )?;
    Ok((EXIT_OK, format!("{name}: sup-norm decay slopes n=0,1,2: [{}]", slopes.join(", "))))
}

fn stage_nonlinear(ctx: &mut Ctx<'_>) -> Result<(i32, String)> {
    let cfg = ctx.cfg;
    let f = cfg.profile()?;
    let w = cfg.potential();
    let g0 = cfg.initial_kernel()?;
    let ncfg = cfg.nonlinear_config();
    let r = solve_selfconsistent(&g0, &f, &w, &ncfg)?;
    write_trajectory_csv(&ctx.path("nonlinear_density.csv"), &r.density)?;
    let n = &r.norms;
    let rows = (0..n.t.len()).map(|i| {
        vec![
            fmt_f64(n.t[i]),
            fmt_f64(n.x_norms[i][0]),
            fmt_f64(n.x_norms[i][1]),
            fmt_f64(n.x_norms[i][2]),
            fmt_f64(n.y_norm[i]),
            n.z_norm.as_ref().map_or(String::new(), |z| fmt_f64(z[i])),
        ]
    });
    write_csv(&ctx.path("nonlinear_norms.csv"), &["t", "x0", "x1", "x2", "y", "z"], rows)?;
    let scat = scattering_diagnostic(&r.state, cfg.fit_window);
    let rows = scat.distances.iter().map(|&(t, v)| vec![fmt_f64(t), fmt_f64(v)]);
    write_csv(&ctx.path("scattering.csv"), &["t", "hs_distance"], rows)?;
    ctx.json(
        "nonlinear.json",
        &json!({
            "iterations": r.iterations,
            "converged": r.converged,
            "distances": r.distances,
            "contraction_factors": r.contraction_factors,
            "epsilon": r.epsilon,
            "leakage": r.leakage,
            "leakage_fraction": r.leakage.fraction(),
            "consistency_residual": r.consistency_residual,
            "hermitian_error": r.hermitian_error,
            "sup_rho": r.density.sup_abs(),
            "scattering": {
                "fit": scat.fit,
                "decreasing": scat.decreasing,
                "increases": scat.increases,
                "max_relative_increase": scat.max_relative_increase,
            },
        }),
    )?;
    let code = if r.converged { EXIT_OK } else { EXIT_ERROR };
    Ok((
        code,
        format!(
            "nonlinear: eps = {:.3e}, {} iterations, converged: {}, residual {:.2e}",
            r.epsilon, r.iterations, r.converged, r.consistency_residual
        ),
    ))
}

fn stage_report(ctx: &mut Ctx<'_>) -> Result<(i32, String)> {
    let dir = ctx.dir.to_path_buf();
    let mut stages = serde_json::Map::new();
    let mut tables = serde_json::Map::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        let Some(name) = p.file_name().and_then(|s| s.to_str()).map(String::from) else {
            continue;
        };
        if name == "report.json" {
            continue;
        }
        match p.extension().and_then(|s| s.to_str()) {
            Some("json") => {
                stages.insert(name.trim_end_matches(".json").to_string(), read_json(&p)?);
            }
            Some("csv") => {
                let (header, rows) = read_csv(&p)?;
                tables.insert(name, json!({"columns": header, "rows": rows.len()}));
            }
            _ => {}
        }
    }
    let n = stages.len();
    let report = json!({
        "config": serde_json::to_value(ctx.cfg).map_err(|e| Error::Io(e.to_string()))?,
        "stages": Value::Object(stages),
        "tables": Value::Object(tables),
    });
    ctx.json("report.json", &report)?;
    Ok((EXIT_OK, format!("report: aggregated {n} stage summaries from {}", dir.display())))
}
