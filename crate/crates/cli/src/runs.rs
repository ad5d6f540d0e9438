//! Run-directory persistence helpers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use fdrl::flow::ParticleBatch;
use fdrl::matrix::Matrix;
use fdrl::io::{save_particle_batch, write_particles_csv};

use crate::svg::{self, Series};
use crate::CliError;

/// Creates the run directory. Called only after full validation so a failed
/// validation leaves no files behind.
pub fn create_out_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::Io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(format!("serialization failed: {e}")))?;
    write_text(path, &text)
}

/// Failure report written on mid-run numerical errors.
#[derive(Debug, Serialize)]
pub struct FailureReport {
    pub step: Option<usize>,
    pub error: String,
    /// True when the failure is the documented expected outcome (the stale
    /// baseline diverging across a chasm), not a defect.
    pub expected_outcome: bool,
}

pub fn write_failure_report(dir: &Path, report: &FailureReport) -> Result<(), CliError> {
    write_json(&dir.join("failure_report.json"), report)
}

/// Writes `base.csv`, `base.json`, and `base.svg` (samples over a reference
/// set) for a particle batch.
pub fn save_batch_with_plot(
    dir: &Path,
    base: &str,
    batch: &ParticleBatch,
    reference: Option<(&str, &Matrix)>,
    seed: u64,
    title: &str,
) -> Result<(), CliError> {
    save_particle_batch(&dir.join(base), batch, seed).map_err(CliError::from_validation)?;
    let mut series = Vec::new();
    if let Some((label, points)) = reference {
        series.push(Series {
            label,
            color: svg::COLOR_REFERENCE,
            points,
        });
    }
    series.push(Series {
        label: "samples",
        color: svg::COLOR_SAMPLES,
        points: &batch.points,
    });
    write_text(&dir.join(format!("{base}.svg")), &svg::scatter(title, &series))
}

/// Writes a bare matrix as CSV (no sidecar), for reference sets.
pub fn save_points(dir: &Path, name: &str, points: &Matrix) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_particles_csv(&path, points).map_err(CliError::from_validation)?;
    Ok(path)
}
