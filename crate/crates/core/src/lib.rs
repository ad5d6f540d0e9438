//! Flow-guided density ratio learning on low-dimensional targets.
//!
//! A density-ratio estimator `r(x) ~ q(x)/p(x)` trained under the Bregman
//! divergence can drive a particle flow toward `p`: particles follow the
//! stale-estimator SDE
//!
//! ```text
//! dx = -grad f'(r(x)) dt + sqrt(2 gamma) dw
//! ```
//!
//! discretized with Euler-Maruyama steps `x' = x - eta * grad f'(r(x)) + nu * xi`.
//! When the source and target are far apart the plain ("stale baseline")
//! estimator learns a ratio that is useless for transport. Flow-guided
//! training fixes this: each training iteration flows fresh prior samples K
//! steps under the *current* estimator and fits the Bregman loss against data
//! samples, so the fake batch improves as the model improves.
//!
//! The crate provides:
//!
//! - [`nn`]: a small feed-forward network with analytic parameter *and*
//!   input gradients, Adam, and EMA weight tracking.
//! - [`divergence`]: f-divergence derivatives (direct and stable log-ratio
//!   forms) and the LSIF / LR Bregman objectives.
//! - [`flow`]: the Euler-Maruyama particle flow and two-stage `K + kappa`
//!   sampling.
//! - [`data`]: synthetic 2D targets (Gaussians, mixtures, swiss roll, two
//!   moons) and priors, including the data-dependent Gaussian.
//! - [`train`]: the flow-guided training loop plus the stale-baseline mode.
//! - [`conditional`]: class-conditional sampling by composing the ratio with
//!   a classifier.
//! - [`eval`]: energy distance, analytic Gaussian ratio oracles, exact-ratio
//!   drifts, histogram diagnostics.
//! - [`io`]: checkpoint JSON, particle CSV, and metrics formats.

use thiserror::Error;

pub mod conditional;
pub mod data;
pub mod divergence;
pub mod eval;
pub mod flow;
pub mod io;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod train;

pub use divergence::{BregmanObjective, FDivergence};
pub use flow::{FlowConfig, ParticleBatch};
pub use matrix::Matrix;
pub use nn::{Activation, DensityRatioModel, Head};

/// Errors produced by the library.
///
/// Numerical failures (non-finite values) are kept distinct from contract
/// violations so callers can tell "the run diverged" from "the call was
/// malformed".
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: dimension mismatch, expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite gradient at parameter index {param_index}")]
    NonFiniteGradient { param_index: usize },

    #[error("density ratio must be positive, got r = {r}")]
    RatioDomain { r: f64 },

    #[error("divergence {divergence:?} has no log-ratio form")]
    NoLogRatioForm { divergence: FDivergence },

    #[error("invalid pairing: objective {objective:?} with divergence {divergence:?}")]
    InvalidPairing {
        objective: BregmanObjective,
        divergence: FDivergence,
    },

    #[error("empty {which} batch")]
    EmptyBatch { which: &'static str },

    #[error("non-finite model output in {which} batch at index {index}")]
    NonFiniteOutput { which: &'static str, index: usize },

    #[error("non-finite particle {particle}{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFiniteParticle { particle: usize, step: Option<usize> },

    #[error("Cholesky factorization failed with jitter {jitter}; increase the jitter")]
    CholeskyFailed { jitter: f64 },

    #[error("non-finite loss at training step {step}; recent losses: {recent:?}")]
    NonFiniteLoss { step: usize, recent: Vec<f64> },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    #[error("unsupported head for {context}: requires a log-ratio head")]
    UnsupportedHead { context: &'static str },

    #[error("no analytic drift for the requested divergence/source pair")]
    UnsupportedAnalyticPair,

    #[error("metric log is empty")]
    EmptyLog,

    #[error("checkpoint format error: {what}")]
    CheckpointFormat { what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by non-finite arithmetic rather than misuse.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient { .. }
                | Error::NonFiniteOutput { .. }
                | Error::NonFiniteParticle { .. }
                | Error::NonFiniteLoss { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
