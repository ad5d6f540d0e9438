//! On-disk formats: checkpoint JSON, particle CSV with a JSON sidecar,
//! metrics CSV, and the eval report.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so every
//! format is value-exact for 64-bit floats: reading back a written file
//! recovers the same bits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::flow::ParticleBatch;
use crate::matrix::Matrix;
use crate::nn::{Activation, AdamState, DensityRatioModel, EmaParams, Head, Layer, Mlp};
use crate::train::MetricRecord;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Per-layer parameters as nested decimal arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayerParams {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchDoc {
    /// Layer dimensions, input first: `[d, h1, ..., 1]`.
    pub dims: Vec<usize>,
    pub activation: String,
    pub head: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamDoc {
    pub m1: Vec<LayerParams>,
    pub m2: Vec<LayerParams>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// The checkpoint document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub format_version: u32,
    pub arch: ArchDoc,
    pub params: Vec<LayerParams>,
    pub adam: AdamDoc,
    pub ema_params: Vec<LayerParams>,
    pub rng_seed: u64,
}

fn layers_to_params(model: &Mlp) -> Vec<LayerParams> {
    model
        .layers()
        .iter()
        .map(|layer| LayerParams {
            w: (0..layer.out_dim())
                .map(|o| layer.weights().row(o).to_vec())
                .collect(),
            b: layer.bias().to_vec(),
        })
        .collect()
}

/// Reshapes a flat vector (the Adam/EMA layout) into nested per-layer arrays.
fn flat_to_params(model: &Mlp, flat: &[f64]) -> Result<Vec<LayerParams>> {
    if flat.len() != model.param_count() {
        return Err(Error::DimensionMismatch {
            context: "checkpoint flat params",
            expected: model.param_count(),
            got: flat.len(),
        });
    }
    let mut out = Vec::with_capacity(model.layers().len());
    let mut offset = 0;
    for layer in model.layers() {
        let (o, i) = (layer.out_dim(), layer.in_dim());
        let mut w = Vec::with_capacity(o);
        for r in 0..o {
            w.push(flat[offset + r * i..offset + (r + 1) * i].to_vec());
        }
        offset += o * i;
        let b = flat[offset..offset + o].to_vec();
        offset += o;
        out.push(LayerParams { w, b });
    }
    Ok(out)
}

fn params_to_flat(params: &[LayerParams]) -> Vec<f64> {
    let mut flat = Vec::new();
    for lp in params {
        for row in &lp.w {
            flat.extend_from_slice(row);
        }
        flat.extend_from_slice(&lp.b);
    }
    flat
}

fn params_to_layers(params: &[LayerParams]) -> Result<Vec<Layer>> {
    params
        .iter()
        .map(|lp| {
            let rows = lp.w.len();
            let cols = lp.w.first().map_or(0, Vec::len);
            if rows == 0 || cols == 0 || lp.w.iter().any(|r| r.len() != cols) {
                return Err(Error::CheckpointFormat {
                    what: "ragged or empty weight matrix".into(),
                });
            }
            let data: Vec<f64> = lp.w.iter().flatten().copied().collect();
            Layer::new(Matrix::from_vec(rows, cols, data)?, lp.b.clone())
        })
        .collect()
}

impl CheckpointDoc {
    pub fn from_parts(
        model: &DensityRatioModel,
        adam: &AdamState,
        ema: &EmaParams,
        rng_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            arch: ArchDoc {
                dims: model.dims(),
                activation: model.activation().tag().into(),
                head: model.head().tag().into(),
            },
            params: layers_to_params(model.mlp()),
            adam: AdamDoc {
                m1: flat_to_params(model.mlp(), &adam.m1)?,
                m2: flat_to_params(model.mlp(), &adam.m2)?,
                t: adam.t,
                beta1: adam.beta1,
                beta2: adam.beta2,
                eps: adam.eps,
            },
            ema_params: flat_to_params(model.mlp(), &ema.values)?,
            rng_seed,
        })
    }

    /// Rebuilds the model, optimizer state, and EMA copy.
    pub fn into_parts(self) -> Result<(DensityRatioModel, AdamState, EmaParams, u64)> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::CheckpointFormat {
                what: format!(
                    "unsupported format version {} (expected {})",
                    self.format_version, CHECKPOINT_FORMAT_VERSION
                ),
            });
        }
        let activation = Activation::from_tag(&self.arch.activation)?;
        let head = Head::from_tag(&self.arch.head)?;
        let layers = params_to_layers(&self.params)?;
        let mlp = Mlp::from_layers(layers, activation)?;
        if mlp.dims() != self.arch.dims {
            return Err(Error::CheckpointFormat {
                what: format!(
                    "arch dims {:?} do not match parameter shapes {:?}",
                    self.arch.dims,
                    mlp.dims()
                ),
            });
        }
        let model = DensityRatioModel::from_mlp(mlp, head)?;

        let m1 = params_to_flat(&self.adam.m1);
        let m2 = params_to_flat(&self.adam.m2);
        if m1.len() != model.param_count() || m2.len() != model.param_count() {
            return Err(Error::CheckpointFormat {
                what: "Adam moment shapes do not match parameters".into(),
            });
        }
        let adam = AdamState {
            m1,
            m2,
            t: self.adam.t,
            beta1: self.adam.beta1,
            beta2: self.adam.beta2,
            eps: self.adam.eps,
        };

        let ema_values = params_to_flat(&self.ema_params);
        if ema_values.len() != model.param_count() {
            return Err(Error::CheckpointFormat {
                what: "EMA shape does not match parameters".into(),
            });
        }
        // The EMA decay is a training hyperparameter, not part of the stored
        // averages; sampling from a checkpoint never updates the EMA.
        let ema = EmaParams {
            values: ema_values,
            decay: 0.0,
        };
        Ok((model, adam, ema, self.rng_seed))
    }
}

pub fn save_checkpoint(path: &Path, doc: &CheckpointDoc) -> Result<()> {
    let json = serde_json::to_string_pretty(doc)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointDoc> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a particle matrix as CSV: header `x0,...,x{d-1}`, one row per
/// particle.
pub fn write_particles_csv(path: &Path, points: &Matrix) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..points.cols()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in points.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_particles_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidParameter {
        what: format!("{}: empty particles CSV", path.display()),
    })?;
    let dim = header.split(',').count();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::InvalidParameter {
            what: format!("{} line {}: {e}", path.display(), lineno + 2),
        })?;
        if row.len() != dim {
            return Err(Error::InvalidParameter {
                what: format!(
                    "{} line {}: expected {dim} columns, got {}",
                    path.display(),
                    lineno + 2,
                    row.len()
                ),
            });
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// Particle provenance sidecar.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParticleMeta {
    pub steps_taken: usize,
    pub source: String,
    pub seed: u64,
}

/// Writes `base.csv` plus `base.json` for a particle batch.
pub fn save_particle_batch(base: &Path, batch: &ParticleBatch, seed: u64) -> Result<()> {
    write_particles_csv(&base.with_extension("csv"), &batch.points)?;
    let meta = ParticleMeta {
        steps_taken: batch.steps_taken,
        source: batch.source.clone(),
        seed,
    };
    fs::write(
        base.with_extension("json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

/// Metrics CSV: `step,loss,lr,flowed_mean_0..{d-1},energy_distance`.
/// The energy-distance cell is empty when it was not evaluated.
pub fn write_metrics_csv(path: &Path, log: &[MetricRecord]) -> Result<()> {
    let dim = log.first().map_or(0, |r| r.flowed_mean.len());
    let mut out = String::from("step,loss,lr");
    for j in 0..dim {
        out.push_str(&format!(",flowed_mean_{j}"));
    }
    out.push_str(",energy_distance\n");
    for rec in log {
        out.push_str(&format!("{},{},{}", rec.step, rec.loss, rec.lr));
        for v in &rec.flowed_mean {
            out.push_str(&format!(",{v}"));
        }
        match rec.energy_distance {
            Some(ed) => out.push_str(&format!(",{ed}\n")),
            None => out.push_str(",\n"),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// The `eval` subcommand's report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub energy_distance: f64,
    /// Quartiles (p25, p50, p75) of nearest-neighbor distances from the
    /// evaluated set to the reference set.
    pub nn_distance_quantiles: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<f64>,
}

pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}
