//! Trajectory tables, JSON documents and binary field snapshots.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, GridSpec};
use crate::observables::Observables;

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "t",
    "mass_u",
    "mass_v",
    "H",
    "V",
    "G",
    "grad_norm_sq",
    "spectral_tail_fraction",
    "residual_energy_paper",
    "residual_energy_gradient",
    "residual_V",
    "residual_G",
];

/// Identity residuals attached to a trajectory row; NaN when not tracked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowResiduals {
    pub energy_paper: f64,
    pub energy_gradient: f64,
    pub v: f64,
    pub g: f64,
}

impl RowResiduals {
    pub const UNTRACKED: RowResiduals = RowResiduals {
        energy_paper: f64::NAN,
        energy_gradient: f64::NAN,
        v: f64::NAN,
        g: f64::NAN,
    };
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_trajectory_csv(
    path: &Path,
    rows: &[Observables],
    residuals: &[RowResiduals],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TRAJECTORY_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for (i, r) in rows.iter().enumerate() {
        let res = residuals.get(i).copied().unwrap_or(RowResiduals::UNTRACKED);
        let values = [
            r.t,
            r.mass_u,
            r.mass_v,
            r.hamiltonian,
            r.variance,
            r.momentum_g,
            r.grad_norm_sq,
            r.spectral_tail_fraction,
            res.energy_paper,
            res.energy_gradient,
            res.v,
            res.g,
        ];
        w.write_record(values.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes any serializable rows with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar describing a binary snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub grid: GridSpec,
    pub components: Vec<String>,
    pub t: f64,
    pub layout: String,
    pub encoding: String,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes `u` then `v` as little-endian `(re, im)` f64 pairs in row-major
/// node order, plus a JSON sidecar next to it.
pub fn write_snapshot(path: &Path, grid: &Grid, state: &SystemState) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for z in state.u.iter().chain(&state.v) {
        w.write_all(&z.re.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.write_all(&z.im.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = SnapshotMeta {
        grid: grid.spec(),
        components: vec!["u".into(), "v".into()],
        t: state.t,
        layout: "row-major".into(),
        encoding: "f64 little-endian (re, im) pairs".into(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a snapshot holding one or two fields on `grid`.
pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<Vec<ComplexField>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let per_field = grid.len() * 16;
    if bytes.is_empty() || bytes.len() % per_field != 0 || bytes.len() / per_field > 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!(
                "{} bytes is not one or two fields of {} nodes",
                bytes.len(),
                grid.len()
            ),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(values
        .chunks_exact(2 * grid.len())
        .map(|f| {
            f.chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, 8, 3.0).unwrap();
        let u = g.sample(|[x, y]| Complex64::new(x.sin() * 1e-300, y / 3.0));
        let v = g.sample(|[x, y]| Complex64::new(x * y, -0.1));
        let s = SystemState::new(u.clone(), v.clone());
        let path = dir.path().join("snap.bin");
        write_snapshot(&path, &g, &s).unwrap();
        let back = read_snapshot(&path, &g).unwrap();
        assert_eq!(back, vec![u, v]);
        let meta: SnapshotMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("snap.json")).unwrap())
                .unwrap();
        assert_eq!(meta.grid, g.spec());
        let wrong = Grid::new(2, 16, 3.0).unwrap();
        assert!(matches!(
            read_snapshot(&path, &wrong),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            read_snapshot(&dir.path().join("missing.bin"), &g),
            Err(Error::Io { .. })
        ));
    }
}
