//! Experiment drivers: each one resolves its parameters, computes, writes
//! deterministic CSV artifacts plus a run.json manifest, and (with --check)
//! evaluates its acceptance bands.

pub mod pod;
pub mod sweeps;

use anyhow::{Context, Result};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use wsk_core::pod::SnapshotField;

/// Acceptance bands evaluated by `--check`; these mirror the pinned
/// tolerances of the library's acceptance suite.
pub mod bands {
    pub const MONOTONE_JITTER: f64 = 1.10;
    pub const DESCENT_FLOOR: f64 = 1e-8;
    pub const R2_AT_J20_K20: f64 = 1e-8;
    pub const PLATEAU_FACTOR: f64 = 2.0;
    pub const R2_FOURIER_AT_J10: f64 = 1e-6;
    pub const R1_R3_FOURIER_FLOOR: f64 = 1e-4;
    pub const TRACKING_FACTOR: f64 = 3.0;
    pub const SLOPE_BAND: f64 = 0.5;
    pub const EPSILON_BAND: (f64, f64) = (5e-4, 1e-2);
    pub const TAU_BAND: (f64, f64) = (0.2, 0.8);
    pub const POD_COEFF_REL: f64 = 0.10;
    pub const POD_CROSS_TERM: f64 = 1e-6;
    pub const POD_ORDER_FACTOR: f64 = 10.0;
    pub const TRIANGLE_SLACK: f64 = 1e-10;
    /// Reference second-component coefficients (constant, mode-0, mode-1)
    /// for the constant-diffusivity mode dynamics and its proxy variant.
    pub const DS1_EXACT: [f64; 3] = [1.35e-2, -3.14e-2, -1.96e-1];
    pub const DS1_PROXY: [f64; 3] = [1.34e-2, -3.14e-2, -1.96e-1];
}

/// Collected check outcomes; failures drive the exit status.
#[derive(Debug, Default)]
pub struct Checks {
    pub failures: Vec<String>,
    pub passed: usize,
}

impl Checks {
    pub fn assert(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failures.push(message());
        }
    }

    pub fn report(&self, experiment: &str) {
        println!(
            "{experiment}: {} checks passed, {} failed",
            self.passed,
            self.failures.len()
        );
        for failure in &self.failures {
            eprintln!("CHECK FAILED: {failure}");
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

/// Write a header line plus pre-rendered rows.
pub fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Serialize a space-time field as CSV (row = time) with a JSON sidecar.
pub fn write_field(
    dir: &Path,
    name: &str,
    field: &SnapshotField,
    beta: &str,
    mode_count: Option<usize>,
) -> Result<()> {
    let csv_path = dir.join(format!("{name}.csv"));
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    let mut out = BufWriter::new(file);
    field.write_csv(&mut out)?;
    out.flush()?;
    let sidecar = field.sidecar(beta.to_string(), mode_count);
    let json_path = dir.join(format!("{name}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok(())
}

/// Plain matrix CSV without header (row-major).
pub fn write_matrix(path: &Path, m: &wsk_core::nalgebra::DMatrix<f64>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
