//! Flat-sectioned key-value config files.
//!
//! The format is INI-shaped: `[section]` headers, `key = value` lines,
//! `#` comments. Unknown sections and keys are rejected so typos fail fast
//! instead of silently falling back to defaults.
//!
//! Section reference (all keys shown with their defaults where one exists):
//!
//! ```text
//! [experiment]  name (required), seed = 0
//! [model]       hidden = 128,128,128; activation = softplus
//! [objective]   bregman = lsif; divergence = pearson_chi2
//! [flow]        eta = 3, nu = 0.01, k = 100, kappa = 20, langevin_gamma (opt)
//! [train]       mode = flow_guided, steps = 1000, batch = 256, lr = 1e-4,
//!               lr_decay_factor = 0.1, lr_milestones = 800,900, ema = 0.998,
//!               eval_use_ema = true, log_every = 10, eval_every = 0,
//!               snapshot_every = 0
//! [target]      kind = gaussian|gaussian_mixture|swiss_roll|two_moons|empirical
//!               + kind-specific keys (mean, var, weights, means, noise, scale, path)
//! [prior]       kind = uniform_box|std_gaussian|data_dependent|empirical
//!               + kind-specific keys (low, high, dim, path, jitter, fit_samples)
//! [chasm]       near = 1,1; far = 6,6; var = 0.1   (chasm-demo only)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fdrl::data::{fit_ddp, DataSource, Prior, TargetSpec};
use fdrl::divergence::{BregmanObjective, FDivergence};
use fdrl::flow::FlowConfig;
use fdrl::io::read_particles_csv;
use fdrl::nn::Activation;
use fdrl::rng::{stream, StreamRole};
use fdrl::train::{TrainConfig, TrainMode};

use crate::CliError;

/// Raw parsed file: section -> key -> value.
#[derive(Debug, Default)]
pub struct IniDoc {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl IniDoc {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut doc = IniDoc::default();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::validation(format!("line {}: malformed section header", lineno + 1))
                })?;
                let name = name.trim().to_lowercase();
                doc.sections.entry(name.clone()).or_default();
                current = Some(name);
            } else if let Some((key, value)) = line.split_once('=') {
                let section = current.clone().ok_or_else(|| {
                    CliError::validation(format!("line {}: key before any [section]", lineno + 1))
                })?;
                let key = key.trim().to_lowercase();
                let prev = doc
                    .sections
                    .get_mut(&section)
                    .unwrap()
                    .insert(key.clone(), value.trim().to_string());
                if prev.is_some() {
                    return Err(CliError::validation(format!(
                        "line {}: duplicate key '{key}' in [{section}]",
                        lineno + 1
                    )));
                }
            } else {
                return Err(CliError::validation(format!(
                    "line {}: expected 'key = value', got {line:?}",
                    lineno + 1
                )));
            }
        }
        Ok(doc)
    }

    fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.get(name)
    }

    /// Rejects sections and per-section keys outside the reference.
    fn check_known(&self) -> Result<(), CliError> {
        const KNOWN: &[(&str, &[&str])] = &[
            ("experiment", &["name", "seed"]),
            ("model", &["hidden", "activation"]),
            ("objective", &["bregman", "divergence"]),
            ("flow", &["eta", "nu", "k", "kappa", "langevin_gamma"]),
            (
                "train",
                &[
                    "mode",
                    "steps",
                    "batch",
                    "lr",
                    "lr_decay_factor",
                    "lr_milestones",
                    "ema",
                    "eval_use_ema",
                    "log_every",
                    "eval_every",
                    "snapshot_every",
                ],
            ),
            (
                "target",
                &["kind", "mean", "var", "weights", "means", "noise", "scale", "path"],
            ),
            (
                "prior",
                &["kind", "low", "high", "dim", "path", "jitter", "fit_samples"],
            ),
            ("chasm", &["near", "far", "var"]),
        ];
        for (section, keys) in &self.sections {
            let Some((_, known_keys)) = KNOWN.iter().find(|(s, _)| s == section) else {
                return Err(CliError::validation(format!("unknown section [{section}]")));
            };
            for key in keys.keys() {
                if !known_keys.contains(&key.as_str()) {
                    return Err(CliError::validation(format!(
                        "unknown key '{key}' in [{section}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn get<'a>(doc: &'a IniDoc, section: &str, key: &str) -> Option<&'a str> {
    doc.section(section).and_then(|s| s.get(key)).map(String::as_str)
}

fn require<'a>(doc: &'a IniDoc, section: &str, key: &str) -> Result<&'a str, CliError> {
    get(doc, section, key).ok_or_else(|| {
        CliError::validation(format!("missing required key '{key}' in [{section}]"))
    })
}

fn parse_val<T: std::str::FromStr>(section: &str, key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| {
        CliError::validation(format!("[{section}] {key} = {raw:?}: {e}"))
    })
}

fn parse_opt<T: std::str::FromStr>(
    doc: &IniDoc,
    section: &str,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    match get(doc, section, key) {
        Some(raw) => parse_val(section, key, raw),
        None => Ok(default),
    }
}

fn parse_f64_list(section: &str, key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|c| parse_val::<f64>(section, key, c.trim()))
        .collect()
}

fn parse_usize_list(section: &str, key: &str, raw: &str) -> Result<Vec<usize>, CliError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|c| parse_val::<usize>(section, key, c.trim()))
        .collect()
}

/// The target section, kept in config form so it can be re-serialized and
/// re-sampled (empirical targets load their CSV once, at resolve time).
#[derive(Debug, Clone)]
pub enum TargetConfig {
    Spec(TargetSpec),
    Empirical { path: PathBuf },
}

/// The prior section in config form.
#[derive(Debug, Clone)]
pub enum PriorConfig {
    UniformBox { low: Vec<f64>, high: Vec<f64> },
    StdGaussian { dim: usize },
    /// Gaussian fitted to the target data: to `fit_samples` fresh target
    /// draws for synthetic targets, or to the dataset itself for empirical
    /// ones.
    DataDependent { jitter: f64, fit_samples: usize },
    Empirical { path: PathBuf },
}

/// Fully parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub objective: BregmanObjective,
    pub divergence: FDivergence,
    pub eta: f64,
    pub nu: f64,
    pub k: usize,
    pub kappa: usize,
    pub langevin_gamma: Option<f64>,
    pub mode: TrainMode,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_milestones: Vec<usize>,
    pub ema: f64,
    pub eval_use_ema: bool,
    pub log_every: usize,
    pub eval_every: usize,
    pub snapshot_every: usize,
    pub target: TargetConfig,
    pub prior: PriorConfig,
    pub chasm: ChasmConfig,
}

/// Gaussian pair for the chasm demo.
#[derive(Debug, Clone)]
pub struct ChasmConfig {
    pub near: Vec<f64>,
    pub far: Vec<f64>,
    pub var: f64,
}

impl Default for ChasmConfig {
    fn default() -> Self {
        Self {
            near: vec![1.0, 1.0],
            far: vec![6.0, 6.0],
            var: 0.1,
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file. `seed_override` (from `--seed`)
    /// replaces the file's seed in the resolved config.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text, seed_override, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, seed_override: Option<u64>, base_dir: &Path) -> Result<Self, CliError> {
        let doc = IniDoc::parse(text)?;
        doc.check_known()?;

        let name = require(&doc, "experiment", "name")?.to_string();
        let seed = match seed_override {
            Some(s) => s,
            None => parse_opt(&doc, "experiment", "seed", 0u64)?,
        };

        let hidden = match get(&doc, "model", "hidden") {
            Some(raw) => parse_usize_list("model", "hidden", raw)?,
            None => vec![128, 128, 128],
        };
        let activation = match get(&doc, "model", "activation") {
            Some(raw) => Activation::from_tag(raw).map_err(CliError::from_validation)?,
            None => Activation::Softplus,
        };

        let objective = match get(&doc, "objective", "bregman") {
            Some(raw) => BregmanObjective::from_tag(raw).map_err(CliError::from_validation)?,
            None => BregmanObjective::Lsif,
        };
        let divergence = match get(&doc, "objective", "divergence") {
            Some(raw) => FDivergence::from_tag(raw).map_err(CliError::from_validation)?,
            None => FDivergence::PearsonChi2,
        };

        let eta = parse_opt(&doc, "flow", "eta", 3.0)?;
        let nu = parse_opt(&doc, "flow", "nu", 1e-2)?;
        let k = parse_opt(&doc, "flow", "k", 100usize)?;
        let kappa = parse_opt(&doc, "flow", "kappa", 20usize)?;
        let langevin_gamma = match get(&doc, "flow", "langevin_gamma") {
            Some(raw) if !raw.is_empty() => Some(parse_val::<f64>("flow", "langevin_gamma", raw)?),
            _ => None,
        };

        let mode = match get(&doc, "train", "mode") {
            Some(raw) => TrainMode::from_tag(raw).map_err(CliError::from_validation)?,
            None => TrainMode::FlowGuided,
        };
        let steps = parse_opt(&doc, "train", "steps", 1000usize)?;
        let batch = parse_opt(&doc, "train", "batch", 256usize)?;
        let lr = parse_opt(&doc, "train", "lr", 1e-4)?;
        let lr_decay_factor = parse_opt(&doc, "train", "lr_decay_factor", 0.1)?;
        let lr_milestones = match get(&doc, "train", "lr_milestones") {
            Some(raw) => parse_usize_list("train", "lr_milestones", raw)?,
            None => vec![steps * 8 / 10, steps * 9 / 10],
        };
        let ema = parse_opt(&doc, "train", "ema", 0.998)?;
        let eval_use_ema = parse_opt(&doc, "train", "eval_use_ema", true)?;
        let log_every = parse_opt(&doc, "train", "log_every", 10usize)?;
        let eval_every = parse_opt(&doc, "train", "eval_every", 0usize)?;
        let snapshot_every = parse_opt(&doc, "train", "snapshot_every", 0usize)?;

        let target = Self::parse_target(&doc, base_dir)?;
        let prior = Self::parse_prior(&doc, base_dir)?;

        let chasm = ChasmConfig {
            near: match get(&doc, "chasm", "near") {
                Some(raw) => parse_f64_list("chasm", "near", raw)?,
                None => ChasmConfig::default().near,
            },
            far: match get(&doc, "chasm", "far") {
                Some(raw) => parse_f64_list("chasm", "far", raw)?,
                None => ChasmConfig::default().far,
            },
            var: parse_opt(&doc, "chasm", "var", 0.1)?,
        };

        let cfg = Self {
            name,
            seed,
            hidden,
            activation,
            objective,
            divergence,
            eta,
            nu,
            k,
            kappa,
            langevin_gamma,
            mode,
            steps,
            batch,
            lr,
            lr_decay_factor,
            lr_milestones,
            ema,
            eval_use_ema,
            log_every,
            eval_every,
            snapshot_every,
            target,
            prior,
            chasm,
        };
        // Build the nested configs once so every invariant is checked before
        // any output file exists.
        cfg.train_config()?;
        Ok(cfg)
    }

    fn parse_target(doc: &IniDoc, base_dir: &Path) -> Result<TargetConfig, CliError> {
        let kind = require(doc, "target", "kind")?;
        let spec = match kind {
            "gaussian" => TargetSpec::Gaussian {
                mean: parse_f64_list("target", "mean", require(doc, "target", "mean")?)?,
                var: parse_val("target", "var", require(doc, "target", "var")?)?,
            },
            "gaussian_mixture" => {
                let weights =
                    parse_f64_list("target", "weights", require(doc, "target", "weights")?)?;
                let means = require(doc, "target", "means")?
                    .split(';')
                    .map(|m| parse_f64_list("target", "means", m.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
                TargetSpec::GaussianMixture {
                    weights,
                    means,
                    var: parse_val("target", "var", require(doc, "target", "var")?)?,
                }
            }
            "swiss_roll" => TargetSpec::SwissRoll2D {
                noise: parse_opt(doc, "target", "noise", 0.0)?,
                scale: parse_opt(doc, "target", "scale", 2.0)?,
            },
            "two_moons" => TargetSpec::TwoMoons {
                noise: parse_opt(doc, "target", "noise", 0.0)?,
            },
            "empirical" => {
                let path = base_dir.join(require(doc, "target", "path")?);
                return Ok(TargetConfig::Empirical { path });
            }
            other => {
                return Err(CliError::validation(format!(
                    "[target] kind = {other:?} is not one of gaussian, gaussian_mixture, swiss_roll, two_moons, empirical"
                )))
            }
        };
        spec.validate().map_err(CliError::from_validation)?;
        Ok(TargetConfig::Spec(spec))
    }

    fn parse_prior(doc: &IniDoc, base_dir: &Path) -> Result<PriorConfig, CliError> {
        let kind = require(doc, "prior", "kind")?;
        Ok(match kind {
            "uniform_box" => PriorConfig::UniformBox {
                low: parse_f64_list("prior", "low", require(doc, "prior", "low")?)?,
                high: parse_f64_list("prior", "high", require(doc, "prior", "high")?)?,
            },
            "std_gaussian" => PriorConfig::StdGaussian {
                dim: parse_opt(doc, "prior", "dim", 2usize)?,
            },
            "data_dependent" => PriorConfig::DataDependent {
                jitter: parse_opt(doc, "prior", "jitter", 1e-6)?,
                fit_samples: parse_opt(doc, "prior", "fit_samples", 4096usize)?,
            },
            "empirical" => PriorConfig::Empirical {
                path: base_dir.join(require(doc, "prior", "path")?),
            },
            other => {
                return Err(CliError::validation(format!(
                    "[prior] kind = {other:?} is not one of uniform_box, std_gaussian, data_dependent, empirical"
                )))
            }
        })
    }

    pub fn flow_config(&self) -> Result<FlowConfig, CliError> {
        let cfg = FlowConfig::new(self.divergence, self.eta, self.nu, self.k, self.kappa)
            .map_err(CliError::from_validation)?;
        match self.langevin_gamma {
            Some(g) => cfg.with_langevin_gamma(g).map_err(CliError::from_validation),
            None => Ok(cfg),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            objective: self.objective,
            flow: self.flow_config()?,
            hidden: self.hidden.clone(),
            activation: self.activation,
            batch_size: self.batch,
            total_steps: self.steps,
            lr: self.lr,
            lr_decay_factor: self.lr_decay_factor,
            lr_milestones: self.lr_milestones.clone(),
            ema_decay: self.ema,
            mode: self.mode,
            seed: self.seed,
            log_every: self.log_every,
            eval_every: self.eval_every,
            eval_use_ema: self.eval_use_ema,
        };
        cfg.validate().map_err(CliError::from_validation)?;
        Ok(cfg)
    }

    /// Loads the target data source (reading the CSV for empirical targets).
    pub fn data_source(&self) -> Result<DataSource, CliError> {
        match &self.target {
            TargetConfig::Spec(spec) => Ok(DataSource::Spec(spec.clone())),
            TargetConfig::Empirical { path } => {
                let points = read_particles_csv(path).map_err(|e| {
                    CliError::validation(format!("[target] path {}: {e}", path.display()))
                })?;
                Ok(DataSource::Empirical(points))
            }
        }
    }

    /// Builds the prior, sampling/fitting as needed (deterministic in the
    /// config seed).
    pub fn build_prior(&self, target: &DataSource) -> Result<Prior, CliError> {
        match &self.prior {
            PriorConfig::UniformBox { low, high } => {
                Prior::uniform_box(low.clone(), high.clone()).map_err(CliError::from_validation)
            }
            PriorConfig::StdGaussian { dim } => {
                Prior::std_gaussian(*dim).map_err(CliError::from_validation)
            }
            PriorConfig::DataDependent { jitter, fit_samples } => {
                let points = match target {
                    DataSource::Empirical(points) => points.clone(),
                    DataSource::Spec(_) => {
                        let mut rng = stream(self.seed, StreamRole::Eval, 100);
                        target
                            .sample(*fit_samples, &mut rng)
                            .map_err(CliError::from_validation)?
                    }
                };
                fit_ddp(&points, *jitter).map_err(CliError::from_validation)
            }
            PriorConfig::Empirical { path } => {
                let points = read_particles_csv(path).map_err(|e| {
                    CliError::validation(format!("[prior] path {}: {e}", path.display()))
                })?;
                Prior::empirical(points).map_err(CliError::from_validation)
            }
        }
    }

    /// Serializes the fully resolved config; parsing it back yields an
    /// equivalent `RunConfig`.
    pub fn to_resolved_ini(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "hidden = {}", join_usize(&self.hidden));
        let _ = writeln!(s, "activation = {}", self.activation.tag());
        let _ = writeln!(s, "\n[objective]");
        let _ = writeln!(s, "bregman = {}", self.objective.tag());
        let _ = writeln!(s, "divergence = {}", self.divergence.tag());
        let _ = writeln!(s, "\n[flow]");
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "nu = {}", self.nu);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "kappa = {}", self.kappa);
        if let Some(g) = self.langevin_gamma {
            let _ = writeln!(s, "langevin_gamma = {g}");
        }
        let _ = writeln!(s, "\n[train]");
        let _ = writeln!(s, "mode = {}", self.mode.tag());
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "lr_decay_factor = {}", self.lr_decay_factor);
        let _ = writeln!(s, "lr_milestones = {}", join_usize(&self.lr_milestones));
        let _ = writeln!(s, "ema = {}", self.ema);
        let _ = writeln!(s, "eval_use_ema = {}", self.eval_use_ema);
        let _ = writeln!(s, "log_every = {}", self.log_every);
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "\n[target]");
        match &self.target {
            TargetConfig::Spec(TargetSpec::Gaussian { mean, var }) => {
                let _ = writeln!(s, "kind = gaussian");
                let _ = writeln!(s, "mean = {}", join_f64(mean));
                let _ = writeln!(s, "var = {var}");
            }
            TargetConfig::Spec(TargetSpec::GaussianMixture { weights, means, var }) => {
                let _ = writeln!(s, "kind = gaussian_mixture");
                let _ = writeln!(s, "weights = {}", join_f64(weights));
                let mean_strs: Vec<String> = means.iter().map(|m| join_f64(m)).collect();
                let _ = writeln!(s, "means = {}", mean_strs.join("; "));
                let _ = writeln!(s, "var = {var}");
            }
            TargetConfig::Spec(TargetSpec::SwissRoll2D { noise, scale }) => {
                let _ = writeln!(s, "kind = swiss_roll");
                let _ = writeln!(s, "noise = {noise}");
                let _ = writeln!(s, "scale = {scale}");
            }
            TargetConfig::Spec(TargetSpec::TwoMoons { noise }) => {
                let _ = writeln!(s, "kind = two_moons");
                let _ = writeln!(s, "noise = {noise}");
            }
            TargetConfig::Empirical { path } => {
                let _ = writeln!(s, "kind = empirical");
                let _ = writeln!(s, "path = {}", path.display());
            }
        }
        let _ = writeln!(s, "\n[prior]");
        match &self.prior {
            PriorConfig::UniformBox { low, high } => {
                let _ = writeln!(s, "kind = uniform_box");
                let _ = writeln!(s, "low = {}", join_f64(low));
                let _ = writeln!(s, "high = {}", join_f64(high));
            }
            PriorConfig::StdGaussian { dim } => {
                let _ = writeln!(s, "kind = std_gaussian");
                let _ = writeln!(s, "dim = {dim}");
            }
            PriorConfig::DataDependent { jitter, fit_samples } => {
                let _ = writeln!(s, "kind = data_dependent");
                let _ = writeln!(s, "jitter = {jitter}");
                let _ = writeln!(s, "fit_samples = {fit_samples}");
            }
            PriorConfig::Empirical { path } => {
                let _ = writeln!(s, "kind = empirical");
                let _ = writeln!(s, "path = {}", path.display());
            }
        }
        let _ = writeln!(s, "\n[chasm]");
        let _ = writeln!(s, "near = {}", join_f64(&self.chasm.near));
        let _ = writeln!(s, "far = {}", join_f64(&self.chasm.far));
        let _ = writeln!(s, "var = {}", self.chasm.var);
        s
    }
}

/// Loads the `[chasm]` and `[experiment]` sections for the chasm demo (other
/// sections may be present and are ignored by this subcommand).
pub fn load_chasm_config(path: &Path) -> Result<(ChasmConfig, u64, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    let doc = IniDoc::parse(&text)?;
    doc.check_known()?;
    let name = get(&doc, "experiment", "name").unwrap_or("chasm_demo").to_string();
    let seed = parse_opt(&doc, "experiment", "seed", 7u64)?;
    let defaults = ChasmConfig::default();
    let chasm = ChasmConfig {
        near: match get(&doc, "chasm", "near") {
            Some(raw) => parse_f64_list("chasm", "near", raw)?,
            None => defaults.near,
        },
        far: match get(&doc, "chasm", "far") {
            Some(raw) => parse_f64_list("chasm", "far", raw)?,
            None => defaults.far,
        },
        var: parse_opt(&doc, "chasm", "var", defaults.var)?,
    };
    Ok((chasm, seed, name))
}

/// Resolved config for a chasm-demo run.
pub fn chasm_resolved_ini(name: &str, seed: u64, chasm: &ChasmConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "name = {name}");
    let _ = writeln!(s, "seed = {seed}");
    let _ = writeln!(s, "\n[chasm]");
    let _ = writeln!(s, "near = {}", join_f64(&chasm.near));
    let _ = writeln!(s, "far = {}", join_f64(&chasm.far));
    let _ = writeln!(s, "var = {}", chasm.var);
    s
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
