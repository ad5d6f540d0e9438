//! Synthetic target distributions and flow priors.
//!
//! Targets cover the toy experiments: isotropic Gaussians and mixtures, a 2D
//! swiss roll, and two moons. Priors cover the flow sources: a uniform box,
//! a standard Gaussian, the data-dependent Gaussian (a multivariate normal
//! fitted to the dataset's mean and covariance), and an empirical dataset
//! (the domain-translation source).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Synthetic target distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        var: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        var: f64,
    },
    /// `t = 1.5 pi (1 + 2u)`, `point = scale * (t cos t, t sin t) / (4.5 pi)`
    /// plus isotropic noise; radii stay within `[scale / 3, scale]`.
    SwissRoll2D {
        noise: f64,
        scale: f64,
    },
    /// Two interleaving half circles with isotropic noise.
    TwoMoons {
        noise: f64,
    },
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::Gaussian { mean, var } => {
                if mean.is_empty() {
                    return Err(Error::InvalidParameter {
                        what: "Gaussian target needs a nonempty mean".into(),
                    });
                }
                if !(*var > 0.0) {
                    return Err(Error::InvalidParameter {
                        what: format!("Gaussian target variance must be positive, got {var}"),
                    });
                }
            }
            TargetSpec::GaussianMixture { weights, means, var } => {
                if weights.is_empty() || weights.len() != means.len() {
                    return Err(Error::InvalidParameter {
                        what: "mixture weights and means must be nonempty and equal-length".into(),
                    });
                }
                if weights.iter().any(|&w| !(w > 0.0)) {
                    return Err(Error::InvalidParameter {
                        what: "mixture weights must be positive".into(),
                    });
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidParameter {
                        what: format!("mixture weights must sum to 1, got {sum}"),
                    });
                }
                let d = means[0].len();
                if d == 0 || means.iter().any(|m| m.len() != d) {
                    return Err(Error::InvalidParameter {
                        what: "mixture means must share a nonzero dimension".into(),
                    });
                }
                if !(*var > 0.0) {
                    return Err(Error::InvalidParameter {
                        what: format!("mixture variance must be positive, got {var}"),
                    });
                }
            }
            TargetSpec::SwissRoll2D { noise, scale } => {
                if !(*noise >= 0.0) {
                    return Err(Error::InvalidParameter {
                        what: format!("swiss roll noise must be nonnegative, got {noise}"),
                    });
                }
                if !(*scale > 0.0) {
                    return Err(Error::InvalidParameter {
                        what: format!("swiss roll scale must be positive, got {scale}"),
                    });
                }
            }
            TargetSpec::TwoMoons { noise } => {
                if !(*noise >= 0.0) {
                    return Err(Error::InvalidParameter {
                        what: format!("two moons noise must be nonnegative, got {noise}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Gaussian { mean, .. } => mean.len(),
            TargetSpec::GaussianMixture { means, .. } => means.first().map_or(0, Vec::len),
            TargetSpec::SwissRoll2D { .. } | TargetSpec::TwoMoons { .. } => 2,
        }
    }
}

/// Draws `n` i.i.d. samples from the target.
pub fn sample_target(spec: &TargetSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptyBatch { which: "target sample" });
    }
    let d = spec.dim();
    let mut out = Matrix::zeros(n, d);
    match spec {
        TargetSpec::Gaussian { mean, var } => {
            let sd = var.sqrt();
            for i in 0..n {
                let row = out.row_mut(i);
                for (v, m) in row.iter_mut().zip(mean) {
                    *v = m + sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        TargetSpec::GaussianMixture { weights, means, var } => {
            let sd = var.sqrt();
            for i in 0..n {
                let k = pick_component(weights, rng.random::<f64>());
                let row = out.row_mut(i);
                for (v, m) in row.iter_mut().zip(&means[k]) {
                    *v = m + sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        TargetSpec::SwissRoll2D { noise, scale } => {
            let denom = 4.5 * std::f64::consts::PI;
            for i in 0..n {
                let u: f64 = rng.random();
                let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * u);
                let row = out.row_mut(i);
                row[0] = scale * t * t.cos() / denom + noise * rng.sample::<f64, _>(StandardNormal);
                row[1] = scale * t * t.sin() / denom + noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        TargetSpec::TwoMoons { noise } => {
            for i in 0..n {
                let t = std::f64::consts::PI * rng.random::<f64>();
                let upper = rng.random::<f64>() < 0.5;
                let (mut x, mut y) = if upper {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                x += noise * rng.sample::<f64, _>(StandardNormal);
                y += noise * rng.sample::<f64, _>(StandardNormal);
                let row = out.row_mut(i);
                row[0] = x;
                row[1] = y;
            }
        }
    }
    Ok(out)
}

fn pick_component(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// A flow source distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    UniformBox {
        low: Vec<f64>,
        high: Vec<f64>,
    },
    StdGaussian {
        dim: usize,
    },
    DataDependentGaussian {
        mean: Vec<f64>,
        cov: Matrix,
        /// Lower-triangular Cholesky factor of `cov + jitter * I`.
        chol: Matrix,
    },
    Empirical {
        points: Matrix,
    },
}

impl Prior {
    pub fn uniform_box(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() || low.len() != high.len() {
            return Err(Error::InvalidParameter {
                what: "uniform box bounds must be nonempty and equal-length".into(),
            });
        }
        if low.iter().zip(&high).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter {
                what: "uniform box needs low < high in every dimension".into(),
            });
        }
        Ok(Prior::UniformBox { low, high })
    }

    pub fn std_gaussian(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                what: "standard Gaussian prior needs dim >= 1".into(),
            });
        }
        Ok(Prior::StdGaussian { dim })
    }

    pub fn empirical(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::EmptyBatch { which: "empirical prior" });
        }
        Ok(Prior::Empirical { points })
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::UniformBox { low, .. } => low.len(),
            Prior::StdGaussian { dim } => *dim,
            Prior::DataDependentGaussian { mean, .. } => mean.len(),
            Prior::Empirical { points } => points.cols(),
        }
    }

    /// Short tag used as particle provenance.
    pub fn describe(&self) -> String {
        match self {
            Prior::UniformBox { .. } => "uniform_box".into(),
            Prior::StdGaussian { .. } => "std_gaussian".into(),
            Prior::DataDependentGaussian { .. } => "data_dependent_gaussian".into(),
            Prior::Empirical { points } => format!("empirical[{}]", points.rows()),
        }
    }
}

/// Fits the data-dependent Gaussian prior: dataset mean and *population*
/// covariance (divide by `m`), Cholesky-factored after adding `jitter * I`.
pub fn fit_ddp(points: &Matrix, jitter: f64) -> Result<Prior> {
    if points.rows() < 2 {
        return Err(Error::InvalidParameter {
            what: format!("data-dependent prior needs at least 2 points, got {}", points.rows()),
        });
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("jitter must be nonnegative, got {jitter}"),
        });
    }
    let d = points.cols();
    let m = points.rows() as f64;
    let mean = points.col_means();

    let mut cov = Matrix::zeros(d, d);
    for row in points.iter_rows() {
        for a in 0..d {
            let da = row[a] - mean[a];
            // Symmetric by construction: fill the upper triangle, mirror below.
            for b in a..d {
                cov.row_mut(a)[b] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov.row(a)[b] / m;
            cov.row_mut(a)[b] = v;
            cov.row_mut(b)[a] = v;
        }
    }

    let mut jittered = cov.clone();
    for a in 0..d {
        jittered.row_mut(a)[a] += jitter;
    }
    let chol = cholesky(&jittered).ok_or(Error::CholeskyFailed { jitter })?;
    Ok(Prior::DataDependentGaussian { mean, cov, chol })
}

/// Lower-triangular Cholesky factor, or `None` if a pivot is non-positive.
fn cholesky(a: &Matrix) -> Option<Matrix> {
    let d = a.rows();
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a.row(i)[j];
            for k in 0..j {
                sum -= l.row(i)[k] * l.row(j)[k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l.row_mut(i)[j] = sum.sqrt();
            } else {
                l.row_mut(i)[j] = sum / l.row(j)[j];
            }
        }
    }
    Some(l)
}

/// Draws `n` samples from the prior.
pub fn sample_prior(prior: &Prior, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::EmptyBatch { which: "prior sample" });
    }
    let d = prior.dim();
    let mut out = Matrix::zeros(n, d);
    match prior {
        Prior::UniformBox { low, high } => {
            for i in 0..n {
                let row = out.row_mut(i);
                for j in 0..d {
                    row[j] = rng.random_range(low[j]..high[j]);
                }
            }
        }
        Prior::StdGaussian { .. } => {
            for v in out.as_mut_slice() {
                *v = rng.sample(StandardNormal);
            }
        }
        Prior::DataDependentGaussian { mean, chol, .. } => {
            let mut z = vec![0.0; d];
            for i in 0..n {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                let row = out.row_mut(i);
                for a in 0..d {
                    let mut v = mean[a];
                    for (k, zk) in z.iter().enumerate().take(a + 1) {
                        v += chol.row(a)[k] * zk;
                    }
                    row[a] = v;
                }
            }
        }
        Prior::Empirical { points } => {
            for i in 0..n {
                let k = rng.random_range(0..points.rows());
                out.row_mut(i).copy_from_slice(points.row(k));
            }
        }
    }
    Ok(out)
}

/// A training target: either a synthetic spec (fresh draws every batch) or a
/// fixed dataset sampled with replacement.
#[derive(Debug, Clone)]
pub enum DataSource {
    Spec(TargetSpec),
    Empirical(Matrix),
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Spec(spec) => spec.dim(),
            DataSource::Empirical(points) => points.cols(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DataSource::Spec(spec) => spec.validate(),
            DataSource::Empirical(points) => {
                if points.rows() == 0 || points.cols() == 0 {
                    Err(Error::EmptyBatch { which: "empirical target" })
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        match self {
            DataSource::Spec(spec) => sample_target(spec, n, rng),
            DataSource::Empirical(points) => {
                if n == 0 {
                    return Err(Error::EmptyBatch { which: "target sample" });
                }
                let mut out = Matrix::zeros(n, points.cols());
                for i in 0..n {
                    let k = rng.random_range(0..points.rows());
                    out.row_mut(i).copy_from_slice(points.row(k));
                }
                Ok(out)
            }
        }
    }
}
