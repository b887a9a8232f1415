use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{argmax, compute_metrics, Metrics};
use super::split::{LabeledWindow, SplitPlan};
use crate::autodiff::{adamw_step, AdamWConfig, AdamWState, Tape, Tensor};
use crate::data_io::Task;
use crate::error::{Error, Result};
use crate::vit::{build_graph, forward, ParamVars, VitConfig, VitParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// `None` disables early stopping.
    pub early_stop_patience: Option<usize>,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        TrainConfig {
            lr: adam.lr,
            batch_size: 32,
            max_epochs: 45,
            early_stop_patience: Some(10),
            scheduler_factor: 0.5,
            scheduler_patience: 5,
            weight_decay: adam.weight_decay,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed: 0,
        }
    }
}

fn field(name: &str, message: &str) -> Error {
    Error::Config {
        field: name.to_string(),
        message: message.to_string(),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(field("lr", "must be a finite value >= 0"));
        }
        if self.batch_size == 0 {
            return Err(field("batch_size", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(field("max_epochs", "must be positive"));
        }
        if self.early_stop_patience == Some(0) {
            return Err(field("early_stop_patience", "must be positive or null"));
        }
        if !(self.scheduler_factor > 0.0 && self.scheduler_factor <= 1.0) {
            return Err(field("scheduler_factor", "must lie in (0, 1]"));
        }
        if self.scheduler_patience == 0 {
            return Err(field("scheduler_patience", "must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(field("weight_decay", "must be a finite value >= 0"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(field(name, "must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) {
            return Err(field("eps", "must be positive"));
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamWConfig {
        AdamWConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Running accuracy of the training-mode forward passes.
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub task: Task,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
    /// Evaluation of the kept parameters on the test list, if non-empty.
    pub test: Option<Metrics>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub best_params: VitParams,
    /// Parameters after the last completed epoch.
    pub final_params: VitParams,
}

/// Inference-mode class probabilities `[n, K]`, computed in batches.
pub fn predict_probs(params: &VitParams, cfg: &VitConfig, windows: &[&[f64]], batch_size: usize) -> Result<Tensor> {
    if windows.is_empty() {
        return Err(Error::invalid("no windows to evaluate"));
    }
    let mut data = Vec::with_capacity(windows.len() * cfg.n_classes);
    for chunk in windows.chunks(batch_size.max(1)) {
        let out = forward(params, cfg, chunk, None, false)?;
        data.extend_from_slice(out.probs.data());
    }
    Tensor::new(vec![windows.len(), cfg.n_classes], data)
}

pub fn evaluate(
    params: &VitParams,
    cfg: &VitConfig,
    windows: &[&[f64]],
    labels: &[usize],
    task: Task,
    batch_size: usize,
) -> Result<Metrics> {
    let probs = predict_probs(params, cfg, windows, batch_size)?;
    compute_metrics(&probs, labels, task)
}

fn gather<'a>(data: &'a [LabeledWindow], idx: &[usize]) -> (Vec<&'a [f64]>, Vec<usize>) {
    idx.iter()
        .map(|&i| (data[i].window.samples.as_slice(), data[i].label))
        .unzip()
}

/// Mini-batch AdamW with reduce-on-plateau and early stopping, both
/// keyed on validation accuracy. Returns the parameters of the best
/// validation epoch (earliest on ties).
pub fn train(
    cfg: &VitConfig,
    init: VitParams,
    data: &[LabeledWindow],
    plan: &SplitPlan,
    hp: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    hp.validate()?;
    init.validate(cfg)?;
    if plan.train.is_empty() || plan.val.is_empty() {
        return Err(Error::invalid("training needs non-empty train and validation lists"));
    }
    let task = data[plan.train[0]].task;
    if let Some(bad) = data.iter().find(|w| w.label >= cfg.n_classes) {
        return Err(Error::invalid(format!(
            "label {} of {} exceeds n_classes {}",
            bad.label, bad.window.subject_id, cfg.n_classes
        )));
    }
    let (val_x, val_y) = gather(data, &plan.val);

    let mut params = init;
    let mut best_params = params.clone();
    let mut state = AdamWState::new();
    let mut lr = hp.lr;
    let mut epochs = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut since_lr_change = 0;
    let mut stopped_early = false;

    for epoch in 1..=hp.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        rng.set_stream(epoch as u64);
        let mut order = plan.train.clone();
        order.shuffle(&mut rng);

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(hp.batch_size).enumerate() {
            let (x, y) = gather(data, batch);
            let mut tape = Tape::new();
            let pv = ParamVars::bind(&mut tape, &params, true);
            let g = build_graph(&mut tape, &pv, cfg, &x, Some(&mut rng))?;
            let diverged = |what: &str| Error::Diverged(format!("{what} at epoch {epoch}, batch {}", b + 1));
            if !tape.value(g.logits).is_finite() {
                return Err(diverged("non-finite logits"));
            }
            let k = cfg.n_classes;
            for (row, &yi) in tape.value(g.logits).data().chunks(k).zip(&y) {
                correct += usize::from(argmax(row) == yi);
            }
            let loss = tape.softmax_cross_entropy(g.logits, &y)?;
            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(diverged("non-finite loss"));
            }
            loss_sum += loss_value * y.len() as f64;
            let mut grads = tape.backward(loss)?;
            let grads: Vec<Tensor> = pv
                .vars()
                .into_iter()
                .map(|v| grads.take(v).expect("parameter leaf"))
                .collect();
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(diverged("non-finite gradient"));
            }
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            adamw_step(&mut params.tensors_mut(), &grad_refs, &mut state, &hp.adam(lr))?;
        }

        let val = evaluate(&params, cfg, &val_x, &val_y, task, hp.batch_size)?;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / order.len() as f64,
            train_accuracy: correct as f64 / order.len() as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
        };
        info!(
            "epoch {epoch}: train loss {:.4} acc {:.3}, val loss {:.4} acc {:.3}, lr {lr:e}",
            record.train_loss, record.train_accuracy, record.val_loss, record.val_accuracy
        );
        epochs.push(record);

        if val.accuracy > best_val {
            best_val = val.accuracy;
            best_epoch = epoch;
            best_params = params.clone();
            since_best = 0;
            since_lr_change = 0;
        } else {
            since_best += 1;
            since_lr_change += 1;
            if since_lr_change >= hp.scheduler_patience {
                lr *= hp.scheduler_factor;
                since_lr_change = 0;
                debug!("reducing learning rate to {lr:e}");
            }
            if hp.early_stop_patience.is_some_and(|p| since_best >= p) {
                info!("early stop after epoch {epoch}; best epoch {best_epoch}");
                stopped_early = true;
                break;
            }
        }
    }

    let test = if plan.test.is_empty() {
        None
    } else {
        let (x, y) = gather(data, &plan.test);
        Some(evaluate(&best_params, cfg, &x, &y, task, hp.batch_size)?)
    };
    Ok(TrainOutcome {
        report: TrainReport {
            task,
            epochs,
            best_epoch,
            best_val_accuracy: best_val,
            stopped_early,
            test,
        },
        best_params,
        final_params: params,
    })
}
