//! JSON run configuration.
//!
//! A single versioned file describes the dataset, topology, training
//! hyperparameters, and optional fine-tune/sweep sections, so every
//! experiment is reproducible from the config alone. Unknown keys are
//! rejected everywhere rather than silently ignored.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_mnist, synth_blobs, Dataset, Split};
use crate::error::{Error, Result};
use crate::regularizers::{LayerPenalty, RegKind, RegularizerSpec, Strategy};
use crate::sweep::PruneStrategy;
use crate::training::TrainConfig;

/// Schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_tune: Option<FineTuneSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Dataset source: deterministic synthetic blobs or IDX file pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Synth {
        classes: usize,
        samples: usize,
        test_samples: usize,
        dims: usize,
        seed: u64,
    },
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

/// Network topology; input and output widths come from the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    pub reg: RegSection,
}

fn default_true() -> bool {
    true
}

/// Regularizer settings. `alpha_l2` drives the ℓ2 term and `alpha_l0`
/// the sparseness term (ℓ0, or ℓ1 when that kind is selected); each kind
/// requires its own parameters to be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegSection {
    pub kind: RegKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_l0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_layer: Option<Vec<LayerPenalty>>,
}

impl RegSection {
    /// Check per-kind parameter presence and build the domain spec.
    pub fn to_spec(&self) -> Result<RegularizerSpec> {
        let missing = |what: &str| {
            Error::Config(format!(
                "reg kind `{}` requires `{what}`",
                self.kind.as_str()
            ))
        };
        match self.kind {
            RegKind::None => {}
            RegKind::L2 => {
                self.alpha_l2.ok_or_else(|| missing("alpha_l2"))?;
            }
            RegKind::L1 => {
                self.alpha_l0.ok_or_else(|| missing("alpha_l0"))?;
            }
            RegKind::L0 => {
                self.alpha_l0.ok_or_else(|| missing("alpha_l0"))?;
                self.beta.ok_or_else(|| missing("beta"))?;
            }
            RegKind::L2L0 => {
                self.alpha_l2.ok_or_else(|| missing("alpha_l2"))?;
                self.alpha_l0.ok_or_else(|| missing("alpha_l0"))?;
                self.beta.ok_or_else(|| missing("beta"))?;
            }
        }
        let spec = RegularizerSpec {
            kind: self.kind,
            alpha_l2: self.alpha_l2.unwrap_or(0.0),
            alpha_l0: self.alpha_l0.unwrap_or(0.0),
            beta: self.beta.unwrap_or(1.0),
            strategy: self.strategy.unwrap_or(Strategy::Global),
            per_layer: self.per_layer.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Optional overrides for the fine-tuning pass; anything omitted falls
/// back to the derived defaults (ℓ2-only at the training alpha_l2, half
/// the training eta, same epochs/batch/shuffle).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTuneSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<RegSection>,
}

/// Sweep grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub rates: Vec<f64>,
    pub strategies: Vec<PruneStrategy>,
    #[serde(default)]
    pub fine_tune: bool,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    /// Parse a config file, rejecting unknown keys and wrong schema
    /// versions.
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported, expected {SCHEMA_VERSION}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Materialize the train and test datasets.
    ///
    /// Synthetic test data uses `seed + 1` so the splits never overlap.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.data {
            DataConfig::Synth {
                classes,
                samples,
                test_samples,
                dims,
                seed,
            } => {
                let train = synth_blobs(*classes, *samples, *dims, *seed, Split::Train)?;
                let test = synth_blobs(
                    *classes,
                    *test_samples,
                    *dims,
                    seed.wrapping_add(1),
                    Split::Test,
                )?;
                Ok((train, test))
            }
            DataConfig::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                let train = load_mnist(train_images, train_labels, Split::Train)?;
                let test = load_mnist(test_images, test_labels, Split::Test)?;
                Ok((train, test))
            }
        }
    }

    /// Full dimension chain for the configured topology.
    pub fn network_dims(&self, input_dim: usize, classes: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.model.hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.model.hidden);
        dims.push(classes);
        dims
    }

    /// Training config from the `train` section.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            eta: t.eta,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            reg: t.reg.to_spec()?,
            shuffle: t.shuffle,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fine-tune config: derived defaults overlaid with the `fine_tune`
    /// section, when present.
    pub fn fine_tune_config(&self) -> Result<TrainConfig> {
        let mut cfg = self.train_config()?.fine_tune_defaults();
        if let Some(ft) = &self.fine_tune {
            if let Some(eta) = ft.eta {
                cfg.eta = eta;
            }
            if let Some(epochs) = ft.epochs {
                cfg.epochs = epochs;
            }
            if let Some(batch) = ft.batch_size {
                cfg.batch_size = batch;
            }
            if let Some(reg) = &ft.reg {
                cfg.reg = reg.to_spec()?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

// ===========================================================================
// Tests
// ===========================================================================
