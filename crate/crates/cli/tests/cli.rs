use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hartree-mix"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p
}

const GAUSSIAN: &str = r#"{
    "equilibrium": {"kind": "gaussian"},
    "potential": {"kind": "screened_coulomb"},
    "d": 3,
    "grids": {"probe_k": [0.5]}
}"#;

#[test]
fn marginal_writes_schema_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN);
    let out = dir.path().join("out");
    let o = bin()
        .args(["marginal", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("marginal.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("marginal.json"));
}

#[test]
fn missing_field_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"equilibrium": {"kind": "gaussian"}, "d": 3}"#);
    let o = bin().args(["stability", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("potential"));
}

#[test]
fn bad_value_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"equilibrium": {"kind": "gaussian"}, "potential": {"kind": "zero"}, "d": 0}"#,
    );
    let o = bin().args(["free", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`d`"));
}

#[test]
fn inconclusive_certificate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"equilibrium": {"kind": "gaussian"}, "potential": {"kind": "screened_coulomb"}, "d": 3,
            "grids": {"tau": {"max": 200.0, "count": 4}}}"#,
    );
    let out = dir.path().join("out");
    let o = bin().args(["stability", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN);
    let o = bin().args(["bogus", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn report_aggregates_previous_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN);
    let out = dir.path().join("out");
    for stage in ["marginal", "dispersion", "report"] {
        let o = bin().arg(stage).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(v["stages"]["dispersion"]["samples"].as_u64().unwrap() > 0);
    assert_eq!(v["tables"]["dispersion.csv"]["columns"][3], "route");
}
