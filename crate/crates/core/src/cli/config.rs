use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data_io::{CohortSpec, Task};
use crate::error::{Error, Result};
use crate::signal::PreprocessConfig;
use crate::training::TrainConfig;
use crate::vit::VitConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Dataset manifest; `synth` writes it, `preprocess` reads it.
    pub manifest: String,
    /// Window store directory.
    pub windows: String,
    /// Checkpoint and training report directory.
    pub model: String,
    /// Evaluation metrics and attribution outputs.
    pub reports: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub duration_s: f64,
    pub fs: f64,
    pub noise_std: f64,
    pub gender_effect: f64,
    pub subject_jitter: f64,
    pub bpm_range: [f64; 2],
}

/// Model hyperparameters; sequence length comes from preprocessing and
/// the class count from the task vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub mlp_dim: usize,
    pub survival_prob: f64,
    pub ln_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainHparams {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: Option<usize>,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Every random choice of every stage is derived from this seed.
    pub seed: u64,
    pub task: Task,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainHparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cohort = CohortSpec::default();
        let vit = VitConfig::default();
        let t = TrainConfig::default();
        RunConfig {
            seed: 0,
            task: Task::Gender,
            paths: PathsConfig {
                manifest: "data/manifest.json".into(),
                windows: "windows".into(),
                model: "model".into(),
                reports: "reports".into(),
            },
            synth: SynthConfig {
                n_subjects: cohort.n_subjects,
                duration_s: cohort.duration_s,
                fs: cohort.fs,
                noise_std: cohort.noise_std,
                gender_effect: cohort.gender_effect,
                subject_jitter: cohort.subject_jitter,
                bpm_range: cohort.bpm_range,
            },
            preprocess: PreprocessConfig::default(),
            model: ModelConfig {
                patch_size: vit.patch_size,
                hidden_dim: vit.hidden_dim,
                n_layers: vit.n_layers,
                n_heads: vit.n_heads,
                mlp_dim: vit.mlp_dim,
                survival_prob: vit.survival_prob,
                ln_eps: vit.ln_eps,
            },
            train: TrainHparams {
                lr: t.lr,
                batch_size: t.batch_size,
                max_epochs: t.max_epochs,
                early_stop_patience: t.early_stop_patience,
                scheduler_factor: t.scheduler_factor,
                scheduler_patience: t.scheduler_patience,
                weight_decay: t.weight_decay,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.eps,
            },
        }
    }
}

/// Independent streams drawn from the run seed.
#[derive(Clone, Copy, Debug)]
pub enum SeedStream {
    Synth = 1,
    Split = 2,
    Init = 3,
    Train = 4,
}

pub fn derive_seed(seed: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: name.to_string(),
        message: message.into(),
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        Error::InvalidArgument(message) => Error::Config {
            field: prefix.to_string(),
            message,
        },
        other => other,
    }
}

impl RunConfig {
    pub fn cohort(&self) -> CohortSpec {
        let s = &self.synth;
        CohortSpec {
            n_subjects: s.n_subjects,
            duration_s: s.duration_s,
            fs: s.fs,
            noise_std: s.noise_std,
            gender_effect: s.gender_effect,
            subject_jitter: s.subject_jitter,
            bpm_range: s.bpm_range,
            seed: derive_seed(self.seed, SeedStream::Synth),
        }
    }

    pub fn vit(&self, n_classes: usize) -> VitConfig {
        let m = &self.model;
        VitConfig {
            seq_len: self.preprocess.seq_len,
            patch_size: m.patch_size,
            hidden_dim: m.hidden_dim,
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            mlp_dim: m.mlp_dim,
            n_classes,
            survival_prob: m.survival_prob,
            ln_eps: m.ln_eps,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            scheduler_factor: t.scheduler_factor,
            scheduler_patience: t.scheduler_patience,
            weight_decay: t.weight_decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            seed: derive_seed(self.seed, SeedStream::Train),
        }
    }

    /// Checks every section; errors carry the dotted field name.
    pub fn validate(&self) -> Result<()> {
        let p = &self.preprocess;
        if !(p.low_hz > 0.0) {
            return Err(field("preprocess.low_hz", "must be positive"));
        }
        if !(p.high_hz > p.low_hz) {
            return Err(field("preprocess.high_hz", "must exceed low_hz"));
        }
        if p.filter_order == 0 {
            return Err(field("preprocess.filter_order", "must be positive"));
        }
        if !(p.median_kernel_ms > 0.0) {
            return Err(field("preprocess.median_kernel_ms", "must be positive"));
        }
        if !(p.fs_target > 2.0 * p.high_hz) {
            return Err(field("preprocess.fs_target", "must exceed twice high_hz"));
        }
        if p.seq_len == 0 {
            return Err(field("preprocess.seq_len", "must be positive"));
        }
        if p.stride == 0 {
            return Err(field("preprocess.stride", "must be positive"));
        }
        if !(self.synth.fs > 2.0 * p.high_hz) {
            return Err(field("synth.fs", "must exceed twice preprocess.high_hz"));
        }
        self.cohort().validate().map_err(|e| prefixed("synth", e))?;
        self.vit(2).validate().map_err(|e| match e {
            Error::Config { field: f, message } if f == "seq_len" => Error::Config {
                field: "preprocess.seq_len".into(),
                message,
            },
            other => prefixed("model", other),
        })?;
        self.train_config().validate().map_err(|e| prefixed("train", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Applies `key=value` overrides on dotted paths; values are parsed as
    /// JSON when possible and taken as strings otherwise.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut root = serde_json::to_value(self)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override `{item}` is not key=value")))?;
            let mut slot = &mut root;
            for part in key.split('.') {
                slot = slot
                    .get_mut(part)
                    .ok_or_else(|| field(key, "unknown configuration key"))?;
            }
            *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        }
        serde_json::from_value(root).map_err(|e| Error::invalid(format!("bad override: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&serde_json::to_value(self)?)?;
        s.push('\n');
        Ok(s)
    }
}
