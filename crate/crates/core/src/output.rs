//! Run artifacts: per-step CSV, summary CSV, metadata JSON and legacy VTK
//! snapshots.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::HexMesh;

/// One time step as written to the step CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub t_ms: f64,
    pub nit: usize,
    pub lit_total: usize,
    /// Linear iterations per Newton iteration.
    pub lit_avg: f64,
    /// Mean Lanczos estimate over the step's Newton iterations; NaN when
    /// no linear system was solved.
    pub cond_est: f64,
    pub wall_ms: f64,
}

/// Potential extrema per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_ms: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nit: usize,
    pub lit: usize,
    pub cond_est: f64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| io_err(path, e)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Current commit of the working directory, if inside a git checkout.
pub fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// Writes a legacy ASCII structured-grid file with nodal point data.
pub fn write_vtk(path: &Path, mesh: &HexMesh, fields: &[(&str, &[f64])]) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let [nx, ny, nz] = mesh.node_counts();
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "bidomain snapshot")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_GRID")?;
        writeln!(w, "DIMENSIONS {nx} {ny} {nz}")?;
        writeln!(w, "POINTS {} double", mesh.num_nodes())?;
        for p in &mesh.coords {
            writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
        }
        if !fields.is_empty() {
            writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        }
        for (name, values) in fields {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v}")?;
            }
        }
        w.flush()
    };
    run(&mut w).map_err(|e| io_err(path, e))
}

/// Snapshot file name for a step.
pub fn snapshot_path(dir: &Path, prefix: &str, step: usize) -> PathBuf {
    dir.join(format!("{prefix}_{step:05}.vtk"))
}
