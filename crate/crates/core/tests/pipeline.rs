use std::path::PathBuf;

use hartree_mix::dynamics::{free_trajectory, log_grid, uniform_grid, InitialKernel, TrajectoryMeta};
use hartree_mix::pipeline::io::{read_columns, read_json, read_trajectory_csv, write_trajectory_csv};
use hartree_mix::pipeline::{exit_code, run, RunConfig, Stage, EXIT_INCONCLUSIVE, EXIT_OK};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hartree-mix-pipeline-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(extra: &str, out: &PathBuf) -> RunConfig {
    let text = format!(
        r#"{{
            "equilibrium": {{"kind": "gaussian"}},
            "potential": {{"kind": "screened_coulomb"}},
            "d": 3,
            "grids": {{"k": {{"count": 40, "min": 1e-3, "max": 10.0}}, "t": {{"dt": 0.1, "t_max": 60.0}},
                       "probe_k": [0.2, 1.0]}},
            "output_dir": {:?}{extra}
        }}"#,
        out.to_str().unwrap()
    );
    RunConfig::from_json(&text).unwrap()
}

#[test]
fn free_stage_writes_trajectory_and_fits() {
    let out = scratch("free");
    let cfg = config("", &out);
    let o = run(&cfg, Stage::Free).unwrap();
    assert_eq!(o.exit_code, EXIT_OK);
    let rho = read_trajectory_csv(&out.join("free_density.csv"), cfg.meta()).unwrap();
    let g0 = cfg.initial_kernel().unwrap();
    let again = free_trajectory(&g0, &cfg.k_grid(), &cfg.t_grid(), cfg.meta()).unwrap();
    assert_eq!(rho, again);
    let j = read_json(&out.join("free.json")).unwrap();
    assert_eq!(j["schema"], 1);
    let slope = j["fits"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 3.0).abs() < 0.3, "{slope}");
}

#[test]
fn stability_stage_reports_stable_gaussian() {
    let out = scratch("stability");
    let cfg = config("", &out);
    let o = run(&cfg, Stage::Stability).unwrap();
    assert_eq!(o.exit_code, EXIT_OK);
    let j = read_json(&out.join("stability.json")).unwrap();
    assert_eq!(j["verdict"]["kind"], "stable");
    assert!(j["theta0"].as_f64().unwrap() > 0.0);
}

#[test]
fn inconclusive_scan_exits_with_two() {
    let out = scratch("inconclusive");
    let mut cfg = config("", &out);
    // four τ̃ nodes are far too coarse for the per-edge floor
    cfg.grids.tau.count = 4;
    let r = run(&cfg, Stage::Stability);
    assert_eq!(exit_code(&r), EXIT_INCONCLUSIVE);
    let j = read_json(&out.join("stability.json")).unwrap();
    assert_eq!(j["verdict"]["kind"], "inconclusive");
    let r = run(&cfg, Stage::Green);
    assert_eq!(exit_code(&r), EXIT_INCONCLUSIVE);
}

#[test]
fn dispersion_and_marginal_then_report() {
    let out = scratch("report");
    let cfg = config("", &out);
    assert_eq!(run(&cfg, Stage::Marginal).unwrap().exit_code, EXIT_OK);
    assert_eq!(run(&cfg, Stage::Dispersion).unwrap().exit_code, EXIT_OK);
    let cols = read_columns(&out.join("dispersion.csv"), &["k", "re_D", "im_D"]).unwrap();
    assert_eq!(cols[0].len(), 2 * 2 * 81);
    let o = run(&cfg, Stage::Report).unwrap();
    assert_eq!(o.exit_code, EXIT_OK);
    let j = read_json(&out.join("report.json")).unwrap();
    assert!(j["stages"]["marginal"]["total_mass"].as_f64().unwrap() > 5.5);
    assert_eq!(j["tables"]["dispersion.csv"]["rows"], 324);
}

#[test]
fn runs_are_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    run(&config("", &a), Stage::Marginal).unwrap();
    run(&config("", &b), Stage::Marginal).unwrap();
    for name in ["marginal_phi.csv", "marginal_phi_hat.csv", "marginal.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn trajectory_csv_round_trip_is_bit_exact() {
    let out = scratch("csv");
    let meta = TrajectoryMeta { d: 3, n1: 4.0, n2: 4.0 };
    let g0 = InitialKernel::gaussian(3, 0.7, 1.3);
    let rho = free_trajectory(&g0, &log_grid(1e-3, 5.0, 17), &uniform_grid(0.37, 9.0), meta).unwrap();
    let p = out.join("rho.csv");
    write_trajectory_csv(&p, &rho).unwrap();
    assert_eq!(read_trajectory_csv(&p, meta).unwrap(), rho);
}
