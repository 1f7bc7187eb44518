//! Flat `key = value` training configuration.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use dogan_core::data::GaussianMixtureConfig;
use dogan_core::do_loop::{DoConfig, GanLoss, Variant};
use dogan_core::neural::{Activation, AdamConfig, Arch};
use dogan_core::oracles::OracleConfig;
use serde::{Deserialize, Serialize};

/// What `train` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainVariant {
    Plain,
    DoP,
    DoC,
    Gan,
}

impl FromStr for TrainVariant {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "do" => Ok(Self::Plain),
            "do-p" | "prune" => Ok(Self::DoP),
            "do-c" | "continual" => Ok(Self::DoC),
            "gan" => Ok(Self::Gan),
            _ => bail!("unknown variant {s:?} (expected plain, do-p, do-c or gan)"),
        }
    }
}

impl fmt::Display for TrainVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plain => "plain",
            Self::DoP => "do-p",
            Self::DoC => "do-c",
            Self::Gan => "gan",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            _ => bail!("unknown precision {s:?} (expected f32 or f64)"),
        }
    }
}

/// Every tunable of a training run, with defaults materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: TrainVariant,
    pub seed: u64,
    pub precision: Precision,
    // Data.
    pub modes: usize,
    pub ring_radius: f64,
    pub cluster_std: f64,
    pub noise_dim: usize,
    pub hidden: usize,
    // Double oracle.
    pub epsilon: f64,
    pub s: usize,
    pub max_epochs: usize,
    pub bootstrap_iterations: usize,
    pub lambda: f64,
    pub fisher_samples: usize,
    // Oracles.
    pub iterations: usize,
    pub batch_size: usize,
    pub payoff_batches: usize,
    pub warm_start: bool,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    // Baseline.
    pub gan_updates: usize,
    pub gan_loss: GanLoss,
    // Output.
    pub samples: usize,
    pub samples_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let run = DoConfig::default();
        let adam = AdamConfig::default();
        let data = GaussianMixtureConfig::default();
        Self {
            variant: TrainVariant::DoP,
            seed: 0,
            precision: Precision::F64,
            modes: data.modes,
            ring_radius: data.ring_radius,
            cluster_std: data.cluster_std,
            noise_dim: 2,
            hidden: 64,
            epsilon: run.epsilon,
            s: run.s,
            max_epochs: run.max_epochs,
            bootstrap_iterations: run.bootstrap_iterations,
            lambda: run.lambda,
            fisher_samples: run.fisher_samples,
            iterations: run.oracle.iterations,
            batch_size: run.oracle.batch_size,
            payoff_batches: run.oracle.payoff_batches,
            warm_start: run.oracle.warm_start,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            gan_updates: run.max_epochs * run.oracle.iterations,
            gan_loss: GanLoss::default(),
            samples: 512,
            samples_every: 50,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("invalid value {value:?} for {key}: expected true or false"),
    }
}

impl TrainConfig {
    /// Names accepted by [`TrainConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "variant",
        "seed",
        "precision",
        "modes",
        "ring_radius",
        "cluster_std",
        "noise_dim",
        "hidden",
        "epsilon",
        "s",
        "max_epochs",
        "bootstrap_iterations",
        "lambda",
        "fisher_samples",
        "iterations",
        "batch_size",
        "payoff_batches",
        "warm_start",
        "lr",
        "beta1",
        "beta2",
        "adam_eps",
        "gan_updates",
        "gan_loss",
        "samples",
        "samples_every",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "variant" => self.variant = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "precision" => self.precision = parse(key, value)?,
            "modes" => self.modes = parse(key, value)?,
            "ring_radius" => self.ring_radius = parse(key, value)?,
            "cluster_std" => self.cluster_std = parse(key, value)?,
            "noise_dim" => self.noise_dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "s" => self.s = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "bootstrap_iterations" => self.bootstrap_iterations = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "fisher_samples" => self.fisher_samples = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "payoff_batches" => self.payoff_batches = parse(key, value)?,
            "warm_start" => self.warm_start = parse_bool(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "gan_updates" => self.gan_updates = parse(key, value)?,
            "gan_loss" => {
                self.gan_loss = match value {
                    "saturating" => GanLoss::Saturating,
                    "non_saturating" | "non-saturating" => GanLoss::NonSaturating,
                    _ => bail!("invalid value {value:?} for gan_loss"),
                }
            }
            "samples" => self.samples = parse(key, value)?,
            "samples_every" => self.samples_every = parse(key, value)?,
            other => bail!(
                "unknown key {other:?}; known keys: {}",
                Self::KEYS.join(", ")
            ),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got {line:?}", no + 1))?;
            self.set(key, value)
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    /// Renders the configuration in the format [`TrainConfig::apply_text`]
    /// reads.
    pub fn to_text(&self) -> Result<String> {
        let json = serde_json::to_value(self)?;
        let mut out = String::new();
        for key in Self::KEYS {
            let v = &json[*key];
            let v = v.as_str().map(str::to_owned).unwrap_or_else(|| v.to_string());
            out.push_str(&format!("{key} = {v}\n"));
        }
        Ok(out)
    }

    pub fn dataset(&self) -> GaussianMixtureConfig {
        GaussianMixtureConfig {
            modes: self.modes,
            ring_radius: self.ring_radius,
            cluster_std: self.cluster_std,
            seed: self.seed,
        }
    }

    pub fn oracle(&self) -> Result<OracleConfig> {
        let h = self.hidden;
        let cfg = OracleConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
            },
            payoff_batches: self.payoff_batches,
            seed: self.seed,
            warm_start: self.warm_start,
            generator_arch: Arch::new(
                vec![self.noise_dim, h, h, 2],
                Activation::Tanh,
                Activation::Identity,
            )?,
            discriminator_arch: Arch::new(vec![2, h, h, 1], Activation::Relu, Activation::Sigmoid)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn do_config(&self) -> Result<DoConfig> {
        let variant = match self.variant {
            TrainVariant::Plain | TrainVariant::Gan => Variant::Plain,
            TrainVariant::DoP => Variant::Prune,
            TrainVariant::DoC => Variant::Continual,
        };
        let cfg = DoConfig {
            variant,
            epsilon: self.epsilon,
            s: self.s,
            max_epochs: self.max_epochs,
            oracle: self.oracle()?,
            bootstrap_iterations: self.bootstrap_iterations,
            lambda: self.lambda,
            fisher_samples: self.fisher_samples,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything a run needs before any output is created.
    pub fn validate(&self) -> Result<()> {
        self.dataset().validate()?;
        if self.samples == 0 {
            bail!("samples must be >= 1");
        }
        match self.variant {
            TrainVariant::Gan if self.gan_updates == 0 => bail!("gan_updates must be >= 1"),
            TrainVariant::Gan => {
                self.oracle()?;
            }
            _ => {
                self.do_config()?;
            }
        }
        Ok(())
    }
}
