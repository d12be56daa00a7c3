//! Report files: one JSON document per check plus CSV tables.
//!
//! Every JSON report has the same envelope, keys in this order:
//!
//! | key              | content                                              |
//! |------------------|------------------------------------------------------|
//! | `check`          | check name                                           |
//! | `pass`           | contract outcome, `null` for plain artifacts         |
//! | `summary`        | the line printed on stdout                           |
//! | `generated_unix` | seconds since the epoch, the only varying field      |
//! | `seed`           | solver seed                                          |
//! | `config`         | canonical scenario text, parses back to the config   |
//! | `body`           | check-specific payload                               |
//!
//! CSV tables have a header row, `,` separators, `.` decimals and shortest
//! round-trip number formatting, so reruns with the same seed are
//! byte-identical. Column layouts:
//!
//! * `<check>_scaling.csv`: `hbar, observable, fitted, log10_residual`.
//! * `sigma.csv`: `lo, hi` per interval of `Σ`.
//! * `gaps.csv`: `lo, hi` per certified gap.
//! * `kset.csv`: `x1..xd, member, distance` per node of the finest grid.
//! * `assemble.csv`: `hbar, nodes, nnz, norm_bound, hermiticity_violations`.
//! * `eigs.csv`: `hbar, index, lambda, residual`.
//! * `ldos.csv`: `hbar, x1..xd, scaled_ldos, f0, relative_error`.
//! * `offdiag-decay.csv`: `hbar, inv_sqrt_hbar, kernel, fitted`.
//! * `gap-ldos.csv`: `hbar, scaled_ldos`.
//! * `localization.csv`: `hbar, lambda, radius, exterior_mass`.
//! * `gap_probes.csv`: `hbar, center_x1..xd, half_width, residual,
//!   sigma_distance, deficit`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::verify::ScalingReport;
use crate::Result;

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub check: &'a str,
    pub pass: Option<bool>,
    pub summary: &'a str,
    pub generated_unix: u64,
    pub seed: u64,
    pub config: &'a str,
    pub body: &'a T,
}

/// Machine-readable record of a check that could not run.
#[derive(Debug, Serialize)]
pub struct Failure<'a> {
    pub check: &'a str,
    pub error: String,
}

pub fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes a table; rows must match the header length.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn nums(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| num(x)).collect()
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `x1..xd` column names.
pub fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|a| format!("{prefix}x{a}")).collect()
}

/// Plot-ready table of a scaling fit.
pub fn write_scaling_csv(path: &Path, s: &ScalingReport) -> Result<()> {
    let rows: Vec<Vec<String>> = s
        .hbar_ladder
        .iter()
        .zip(&s.observable)
        .map(|(&h, &y)| {
            let fitted = 10f64.powf(s.fit.eval(h.log10()));
            let resid = if y > 0.0 { y.log10() - fitted.log10() } else { f64::NAN };
            nums(&[h, y, fitted, resid])
        })
        .collect();
    write_table(
        path,
        &header(&["hbar", "observable", "fitted", "log10_residual"]),
        &rows,
    )
}

/// Output directory with report paths for one check.
#[derive(Debug, Clone)]
pub struct OutputDir {
    pub root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }
}
