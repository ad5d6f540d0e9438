//! Training loop for the density-ratio estimator.
//!
//! Each iteration draws a fresh data batch and a fresh prior batch. In
//! flow-guided mode the prior batch is flowed `K` steps under the *current*
//! estimator before the Bregman loss is evaluated; in stale-baseline mode it
//! is used as-is (the configuration that breaks down across a density
//! chasm). Gradients never propagate through the flow itself: the flowed
//! particles enter the loss as constants, and the update touches the
//! parameters only through the loss terms.

use rand_chacha::ChaCha8Rng;

use crate::data::{sample_prior, DataSource, Prior};
use crate::divergence::{bregman_loss, pairing_check, BregmanObjective};
use crate::eval::energy_distance;
use crate::flow::{simulate, FlowConfig, ModelDrift, ParticleBatch};
use crate::nn::{adam_step, Activation, AdamState, DensityRatioModel, EmaParams, Head};
use crate::rng::{derive_seed, stream, FlowRng, StreamRole};
use crate::{Error, Result};

/// Whether the fake batch is flowed each iteration or taken straight from
/// the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    FlowGuided,
    StaleBaseline,
}

impl TrainMode {
    pub fn tag(self) -> &'static str {
        match self {
            TrainMode::FlowGuided => "flow_guided",
            TrainMode::StaleBaseline => "stale_baseline",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "flow_guided" => Ok(TrainMode::FlowGuided),
            "stale_baseline" => Ok(TrainMode::StaleBaseline),
            other => Err(Error::InvalidParameter {
                what: format!("unknown train mode {other:?}"),
            }),
        }
    }
}

/// Full training configuration.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub objective: BregmanObjective,
    pub flow: FlowConfig,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_size: usize,
    pub total_steps: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    /// Steps at which the learning rate is multiplied by the decay factor;
    /// strictly increasing, all below `total_steps`.
    pub lr_milestones: Vec<usize>,
    pub ema_decay: f64,
    pub mode: TrainMode,
    pub seed: u64,
    /// Metric-log cadence; the final step is always logged.
    pub log_every: usize,
    /// Energy-distance logging cadence in *logged* records (0 disables).
    pub eval_every: usize,
    /// Evaluate and sample with EMA weights (the raw weights otherwise).
    pub eval_use_ema: bool,
}

impl TrainConfig {
    /// Defaults mirroring the reference hyperparameters: LSIF-chi2, eta 3,
    /// nu 0.01, K 100, kappa 20, lr 1e-4 decayed twice by 0.1, EMA 0.998,
    /// T 1000, batch 256, hidden 3 x 128.
    pub fn defaults(objective: BregmanObjective, flow: FlowConfig, seed: u64) -> Self {
        let total_steps = 1000;
        Self {
            objective,
            flow,
            hidden: DensityRatioModel::DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Softplus,
            batch_size: 256,
            total_steps,
            lr: 1e-4,
            lr_decay_factor: 0.1,
            lr_milestones: vec![total_steps * 8 / 10, total_steps * 9 / 10],
            ema_decay: 0.998,
            mode: TrainMode::FlowGuided,
            seed,
            log_every: 10,
            eval_every: 0,
            eval_use_ema: true,
        }
    }

    pub fn head(&self) -> Head {
        match self.objective {
            BregmanObjective::Lsif => Head::DirectRatio,
            BregmanObjective::Lr => Head::LogRatio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        pairing_check(self.objective, self.flow.divergence)?;
        if self.total_steps < 1 {
            return Err(Error::InvalidParameter {
                what: "total_steps must be at least 1".into(),
            });
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter {
                what: format!("learning rate must be positive, got {}", self.lr),
            });
        }
        if !(self.lr_decay_factor > 0.0) {
            return Err(Error::InvalidParameter {
                what: format!("lr decay factor must be positive, got {}", self.lr_decay_factor),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                what: "batch size must be at least 1".into(),
            });
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::InvalidParameter {
                what: format!("ema decay must be in [0, 1), got {}", self.ema_decay),
            });
        }
        if self
            .lr_milestones
            .windows(2)
            .any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter {
                what: "lr milestones must be strictly increasing".into(),
            });
        }
        if self.lr_milestones.iter().any(|&m| m >= self.total_steps) {
            return Err(Error::InvalidParameter {
                what: "lr milestones must be below total_steps".into(),
            });
        }
        if self.mode == TrainMode::FlowGuided && self.flow.k_bridge < 1 {
            return Err(Error::InvalidParameter {
                what: "flow-guided training needs at least 1 bridging step".into(),
            });
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidParameter {
                what: "hidden layer widths must be positive".into(),
            });
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        let decays = self.lr_milestones.iter().filter(|&&m| step >= m).count();
        self.lr * self.lr_decay_factor.powi(decays as i32)
    }
}

/// One logged metric record.
#[derive(Debug, Clone)]
pub struct MetricRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    /// Mean of the flowed batch at this step.
    pub flowed_mean: Vec<f64>,
    pub energy_distance: Option<f64>,
}

/// Training result: the model plus optimizer/EMA state and the metric log.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: DensityRatioModel,
    pub adam: AdamState,
    pub ema: EmaParams,
    pub step: usize,
    pub log: Vec<MetricRecord>,
    pub config: TrainConfig,
}

impl TrainState {
    /// The model used for evaluation and sampling: EMA weights when the
    /// config asks for them.
    pub fn eval_model(&self) -> DensityRatioModel {
        if self.config.eval_use_ema {
            let mut model = self.model.clone();
            model
                .set_param_vector(&self.ema.values)
                .expect("EMA shaped like parameters");
            model
        } else {
            self.model.clone()
        }
    }
}

/// Ordered `(step, mean of flowed batch)` pairs from the metric log.
pub fn trajectory_of_means(state: &TrainState) -> Result<Vec<(usize, Vec<f64>)>> {
    if state.log.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(state
        .log
        .iter()
        .map(|r| (r.step, r.flowed_mean.clone()))
        .collect())
}

/// Runs the training loop.
pub fn train(cfg: &TrainConfig, target: &DataSource, prior: &Prior) -> Result<TrainState> {
    train_observed(cfg, target, prior, None)
}

/// Mid-training view handed to the observer after each parameter update.
pub struct TrainProgress<'a> {
    pub step: usize,
    pub flowed: &'a ParticleBatch,
    pub model: &'a DensityRatioModel,
    pub adam: &'a AdamState,
    pub ema: &'a EmaParams,
}

/// Per-iteration observer.
pub type TrainObserver<'a> = &'a mut dyn FnMut(&TrainProgress<'_>);

/// [`train`] with an observer called once per iteration. Drives snapshot and
/// periodic-checkpoint persistence without the trainer knowing about files.
pub fn train_observed(
    cfg: &TrainConfig,
    target: &DataSource,
    prior: &Prior,
    mut observer: Option<TrainObserver<'_>>,
) -> Result<TrainState> {
    cfg.validate()?;
    target.validate()?;
    let dim = target.dim();
    if prior.dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "train prior dim",
            expected: dim,
            got: prior.dim(),
        });
    }

    let mut model =
        DensityRatioModel::new_seeded(dim, &cfg.hidden, cfg.activation, cfg.head(), cfg.seed)?;
    let mut params = model.param_vector();
    let mut adam = AdamState::new(params.len());
    let mut ema = EmaParams::new(&params, cfg.ema_decay);

    let mut target_rng = stream(cfg.seed, StreamRole::Target, 0);
    let mut prior_rng = stream(cfg.seed, StreamRole::Prior, 0);

    let mut log: Vec<MetricRecord> = Vec::new();
    let mut recent = RecentLosses::new(8);

    for step in 0..cfg.total_steps {
        let x_p = target.sample(cfg.batch_size, &mut target_rng)?;
        let x0 = ParticleBatch::new(
            sample_prior(prior, cfg.batch_size, &mut prior_rng)?,
            prior.describe(),
        )?;

        let x_k = match cfg.mode {
            TrainMode::FlowGuided => {
                let field = ModelDrift::new(&model, cfg.flow.divergence)?;
                let mut noise =
                    FlowRng::new(derive_seed(cfg.seed, StreamRole::FlowNoise, step as u64));
                simulate(&field, &x0, cfg.flow.k_bridge, &cfg.flow, &mut noise)
                    .map_err(|e| as_loss_divergence(e, step, &recent))?
            }
            TrainMode::StaleBaseline => x0,
        };

        let out_p = model.forward(&x_p)?;
        let out_q = model
            .forward(&x_k.points)
            .map_err(|e| as_loss_divergence(e, step, &recent))?;
        let bd = bregman_loss(cfg.objective, &out_p, &out_q)
            .map_err(|e| as_loss_divergence(e, step, &recent))?;
        if !bd.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                recent: recent.values(),
            });
        }

        let (grads_p, _) = model.grads(&x_p, &bd.d_out_p)?;
        let (grads_q, _) = model.grads(&x_k.points, &bd.d_out_q)?;
        let grads: Vec<f64> = grads_p.iter().zip(&grads_q).map(|(a, b)| a + b).collect();

        adam_step(&mut adam, &mut params, &grads, cfg.lr_at(step))
            .map_err(|e| as_loss_divergence(e, step, &recent))?;
        model.set_param_vector(&params)?;
        ema.update(&params)?;
        recent.push(bd.loss);

        if let Some(obs) = observer.as_mut() {
            obs(&TrainProgress {
                step,
                flowed: &x_k,
                model: &model,
                adam: &adam,
                ema: &ema,
            });
        }

        let last = step + 1 == cfg.total_steps;
        if last || (cfg.log_every > 0 && step % cfg.log_every == 0) {
            let ed = if cfg.eval_every > 0 && (log.len().is_multiple_of(cfg.eval_every) || last) {
                Some(energy_distance(&x_k.points, &x_p)?)
            } else {
                None
            };
            log.push(MetricRecord {
                step,
                loss: bd.loss,
                lr: cfg.lr_at(step),
                flowed_mean: x_k.points.col_means(),
                energy_distance: ed,
            });
        }
    }

    Ok(TrainState {
        model,
        adam,
        ema,
        step: cfg.total_steps,
        log,
        config: cfg.clone(),
    })
}

/// Draws a fresh rng for helper sampling around training (fixtures, evals).
pub fn eval_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, StreamRole::Eval, 0)
}

fn as_loss_divergence(err: Error, step: usize, recent: &RecentLosses) -> Error {
    if err.is_numerical() {
        Error::NonFiniteLoss {
            step,
            recent: recent.values(),
        }
    } else {
        err
    }
}

struct RecentLosses {
    buf: Vec<f64>,
    cap: usize,
}

impl RecentLosses {
    fn new(cap: usize) -> Self {
        Self { buf: Vec::new(), cap }
    }

    fn push(&mut self, v: f64) {
        if self.buf.len() == self.cap {
            self.buf.remove(0);
        }
        self.buf.push(v);
    }

    fn values(&self) -> Vec<f64> {
        self.buf.clone()
    }
}
