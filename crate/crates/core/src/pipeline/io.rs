//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! every value reads back bit-for-bit.

use std::fs::File;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::dynamics::{DensityTrajectory, TrajectoryMeta};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// A CSV table with a header row; rows are already-formatted cells.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} cells, header has {}",
                r.len(),
                header.len()
            )));
        }
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Header and rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Numeric columns of a CSV file selected by name.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = read_csv(path)?;
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Io(format!("{}: no column `{n}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::with_capacity(rows.len()); names.len()];
    for (line, r) in rows.iter().enumerate() {
        for (c, &i) in idx.iter().enumerate() {
            let v = r[i]
                .parse::<f64>()
                .map_err(|e| Error::Io(format!("{}: row {}: {e}", path.display(), line + 2)))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "k", "re_rho", "im_rho"];

/// Long format, t-major: one row per (t, k).
pub fn write_trajectory_csv(path: &Path, rho: &DensityTrajectory) -> Result<()> {
    let rows = rho.t_grid.iter().enumerate().flat_map(|(it, &t)| {
        rho.k_grid.iter().zip(&rho.rho_hat).map(move |(&k, row)| {
            vec![fmt_f64(t), fmt_f64(k), fmt_f64(row[it].re), fmt_f64(row[it].im)]
        })
    });
    write_csv(path, &TRAJECTORY_HEADER, rows)
}

pub fn read_trajectory_csv(path: &Path, meta: TrajectoryMeta) -> Result<DensityTrajectory> {
    let cols = read_columns(path, &TRAJECTORY_HEADER)?;
    let (ts, ks) = (&cols[0], &cols[1]);
    let mut t_grid: Vec<f64> = Vec::new();
    let mut k_grid: Vec<f64> = Vec::new();
    for i in 0..ts.len() {
        if t_grid.last() != Some(&ts[i]) {
            t_grid.push(ts[i]);
        }
        if t_grid.len() == 1 {
            k_grid.push(ks[i]);
        }
    }
    if k_grid.is_empty() || ts.len() != t_grid.len() * k_grid.len() {
        return Err(Error::Io(format!("{}: rows do not form a (t, k) grid", path.display())));
    }
    let mut rho = DensityTrajectory::zeros(k_grid, t_grid, meta);
    let nk = rho.k_grid.len();
    for i in 0..ts.len() {
        let (it, ik) = (i / nk, i % nk);
        if ks[i] != rho.k_grid[ik] {
            return Err(Error::Io(format!("{}: k column out of order at row {}", path.display(), i + 2)));
        }
        rho.rho_hat[ik][it] = Complex64::new(cols[2][i], cols[3][i]);
    }
    Ok(rho)
}

/// Pretty JSON with a top-level `"schema"` field prepended to objects.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    let v = match v {
        Value::Object(m) => {
            let mut out = serde_json::Map::new();
            out.insert("schema".into(), Value::from(SCHEMA_VERSION));
            out.extend(m);
            Value::Object(out)
        }
        other => other,
    };
    let f = File::create(path)?;
    serde_json::to_writer_pretty(f, &v).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value> {
    let f = File::open(path)?;
    serde_json::from_reader(f).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("hartree-mix-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn trajectory_round_trips_exactly() {
        let meta = TrajectoryMeta { d: 3, n1: 4.0, n2: 4.0 };
        let mut rho = DensityTrajectory::zeros(vec![0.1, 0.7, 3.0], vec![0.0, 0.3, 0.6], meta);
        for (ik, row) in rho.rho_hat.iter_mut().enumerate() {
            for (it, v) in row.iter_mut().enumerate() {
                *v = Complex64::new(1.0 / 3.0 + ik as f64, std::f64::consts::PI * it as f64 * 1e-300);
            }
        }
        let p = tmp("traj.csv");
        write_trajectory_csv(&p, &rho).unwrap();
        let back = read_trajectory_csv(&p, meta).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn json_gets_schema() {
        #[derive(Serialize)]
        struct S {
            a: f64,
        }
        let p = tmp("s.json");
        write_json(&p, &S { a: 0.1 }).unwrap();
        let v = read_json(&p).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["a"], 0.1);
    }

    #[test]
    fn ragged_row_rejected() {
        let p = tmp("bad.csv");
        assert!(write_csv(&p, &["a", "b"], vec![vec!["1".into()]]).is_err());
    }
}
