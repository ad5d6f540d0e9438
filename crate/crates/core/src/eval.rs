//! Quantitative checks: energy distance, analytic Gaussian ratio oracles,
//! exact-ratio drifts, histogram diagnostics, nearest-neighbor distances.
//!
//! These stand in for image-scale metrics at desk scale. Energy distance is
//! the headline two-sample statistic: kernel-free, zero iff the
//! distributions coincide, and cheap at a few thousand points.

use crate::divergence::{sigmoid, FDivergence};
use crate::matrix::{euclidean, Matrix};
use crate::{Error, Result};

/// Isotropic Gaussian `N(mean, var * I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub var: f64,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::InvalidParameter {
                what: format!("Gaussian variance must be positive, got {var}"),
            });
        }
        Ok(Self { mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let sq = x
            .iter()
            .zip(&self.mean)
            .map(|(xi, mi)| (xi - mi) * (xi - mi))
            .sum::<f64>();
        -0.5 * sq / self.var - 0.5 * d * (2.0 * std::f64::consts::PI * self.var).ln()
    }

    /// `grad_x log N(x; mean, var I) = -(x - mean) / var`
    pub fn log_density_grad(&self, x: &[f64], out: &mut [f64]) {
        for ((g, xi), mi) in out.iter_mut().zip(x).zip(&self.mean) {
            *g = -(xi - mi) / self.var;
        }
    }
}

/// Energy distance between two samples, as a V-statistic:
/// `2 mean||a - b|| - mean||a - a'|| - mean||b - b'||` over all pairs,
/// self-pairs included.
///
/// The arguments are put in a canonical order first and every term uses the
/// same double-loop summation, so `energy_distance(A, B) == energy_distance(B, A)`
/// and `energy_distance(A, A) == 0` hold exactly in floating point, not just
/// up to rounding.
pub fn energy_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::EmptyBatch { which: "energy_distance" });
    }
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "energy_distance",
            expected: a.cols(),
            got: b.cols(),
        });
    }
    let (x, y) = canonical_order(a, b);
    let cross = mean_pairwise(x, y);
    let within_x = mean_pairwise(x, x);
    let within_y = mean_pairwise(y, y);
    Ok(2.0 * cross - within_x - within_y)
}

/// Deterministic argument order independent of which sample came first.
fn canonical_order<'a>(a: &'a Matrix, b: &'a Matrix) -> (&'a Matrix, &'a Matrix) {
    if a.rows() != b.rows() {
        return if a.rows() < b.rows() { (a, b) } else { (b, a) };
    }
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return (a, b),
            std::cmp::Ordering::Greater => return (b, a),
            std::cmp::Ordering::Equal => {}
        }
    }
    (a, b)
}

fn mean_pairwise(a: &Matrix, b: &Matrix) -> f64 {
    let mut sum = 0.0;
    for ra in a.iter_rows() {
        for rb in b.iter_rows() {
            sum += euclidean(ra, rb);
        }
    }
    sum / (a.rows() as f64 * b.rows() as f64)
}

/// Closed-form `log q(x) - log p(x)` for isotropic Gaussians.
pub fn analytic_gaussian_log_ratio(
    q: &GaussianParams,
    p: &GaussianParams,
    x: &Matrix,
) -> Result<Vec<f64>> {
    if q.dim() != p.dim() || x.cols() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "analytic_gaussian_log_ratio",
            expected: q.dim(),
            got: if q.dim() != p.dim() { p.dim() } else { x.cols() },
        });
    }
    Ok(x.iter_rows()
        .map(|row| q.log_density(row) - p.log_density(row))
        .collect())
}

/// Analytic source density for the exact-ratio drift.
#[derive(Debug, Clone)]
pub enum ExactSource {
    Gaussian(GaussianParams),
    /// A uniform density treated as the constant `C` everywhere (support
    /// boundaries ignored, as in the stationarity analysis).
    UniformConstant { log_c: f64 },
}

impl ExactSource {
    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            ExactSource::Gaussian(g) => g.log_density(x),
            ExactSource::UniformConstant { log_c } => *log_c,
        }
    }

    fn log_density_grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ExactSource::Gaussian(g) => g.log_density_grad(x, out),
            ExactSource::UniformConstant { .. } => out.fill(0.0),
        }
    }
}

/// Exact drift `grad_x f'(q(x) / p(x))` for analytic `q` and Gaussian `p`.
///
/// With `s(x) = log q - log p` this is the chain rule on `f'`:
/// KL gives `grad s`, JS gives `sigmoid(-s) grad s`, logD gives
/// `sigmoid(s) grad s`, and Pearson chi-squared gives `2 exp(s) grad s`
/// (which can overflow where `q >> p`; that instability is real and belongs
/// to the divergence, not the implementation).
pub fn exact_ratio_drift(
    div: FDivergence,
    q: &ExactSource,
    p: &GaussianParams,
    x: &Matrix,
) -> Result<Matrix> {
    if x.cols() != p.dim() {
        return Err(Error::DimensionMismatch {
            context: "exact_ratio_drift",
            expected: p.dim(),
            got: x.cols(),
        });
    }
    let d = x.cols();
    let mut out = Matrix::zeros(x.rows(), d);
    let mut grad_q = vec![0.0; d];
    let mut grad_p = vec![0.0; d];
    for i in 0..x.rows() {
        let row = x.row(i);
        let s = q.log_density(row) - p.log_density(row);
        q.log_density_grad(row, &mut grad_q);
        p.log_density_grad(row, &mut grad_p);
        let factor = match div {
            FDivergence::Kl => 1.0,
            FDivergence::Js => sigmoid(-s),
            FDivergence::LogD => sigmoid(s),
            FDivergence::PearsonChi2 => 2.0 * s.exp(),
        };
        let dst = out.row_mut(i);
        for j in 0..d {
            dst[j] = factor * (grad_q[j] - grad_p[j]);
        }
    }
    Ok(out)
}

/// Center of the most-populated bin; ties break toward the smaller center.
///
/// Bins are `[k * width, (k + 1) * width)` so the returned center is
/// `(k + 0.5) * width`.
pub fn histogram_mode_1d(samples: &[f64], bin_width: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch { which: "histogram" });
    }
    if !(bin_width > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("bin width must be positive, got {bin_width}"),
        });
    }
    use std::collections::HashMap;
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &s in samples {
        *counts.entry((s / bin_width).floor() as i64).or_insert(0) += 1;
    }
    let (&bin, _) = counts
        .iter()
        .max_by(|(ka, ca), (kb, cb)| ca.cmp(cb).then(kb.cmp(ka)))
        .unwrap();
    Ok((bin as f64 + 0.5) * bin_width)
}

/// Euclidean distance from each generated point to its nearest training
/// point. The memorization check: all-zero distances mean the "samples" are
/// training points.
pub fn nn_distance(generated: &Matrix, train: &Matrix) -> Result<Vec<f64>> {
    if generated.rows() == 0 || train.rows() == 0 {
        return Err(Error::EmptyBatch { which: "nn_distance" });
    }
    if generated.cols() != train.cols() {
        return Err(Error::DimensionMismatch {
            context: "nn_distance",
            expected: train.cols(),
            got: generated.cols(),
        });
    }
    Ok(generated
        .iter_rows()
        .map(|g| {
            train
                .iter_rows()
                .map(|t| euclidean(g, t))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Quantile by linear interpolation on sorted data, akin to the usual
/// "linear" convention.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
