use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::{derive_seed, RunConfig, SeedStream};
use super::store::{read_store, write_store, StoredWindow};
use crate::data_io::{build_vocab, load_manifest, load_record, synthesize_cohort, write_dataset, LabelVocab, SubjectMeta, Task};
use crate::error::{Error, Result};
use crate::explain::{emit_report, explain_windows, to_sorted_json};
use crate::signal::{preprocess_record, EcgRecord};
use crate::training::{evaluate, make_split, train, LabeledWindow, SplitPlan};
use crate::vit::{init_params, Checkpoint};

pub const CHECKPOINT_FILE: &str = "checkpoint.ecgvit";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Resolved locations of every stage's inputs and outputs.
pub struct Workspace {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub windows: PathBuf,
    pub model: PathBuf,
    pub reports: PathBuf,
}

impl Workspace {
    pub fn new(root: &Path, cfg: &RunConfig) -> Self {
        let at = |p: &str| root.join(p);
        Workspace {
            root: root.to_path_buf(),
            manifest: at(&cfg.paths.manifest),
            windows: at(&cfg.paths.windows),
            model: at(&cfg.paths.model),
            reports: at(&cfg.paths.reports),
        }
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.model.join(CHECKPOINT_FILE)
    }

    fn rel<'a>(&self, p: &'a Path) -> std::borrow::Cow<'a, str> {
        p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn synth(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    let cohort = cfg.cohort();
    let records: Vec<EcgRecord> = synthesize_cohort(&cohort)?.into_iter().map(|(r, _)| r).collect();
    write_dataset(&ws.manifest, "synthetic", &records)?;
    Ok(format!(
        "synth: {} subjects, {} s at {} Hz -> {}",
        records.len(),
        cohort.duration_s,
        cohort.fs,
        ws.rel(&ws.manifest)
    ))
}

pub fn preprocess(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    let manifest = load_manifest(&ws.manifest)?;
    let p = &cfg.preprocess;
    let mut stored = Vec::new();
    let mut too_short = 0;
    for entry in &manifest.records {
        let record = load_record(&manifest, entry)?;
        let windows = preprocess_record(&record, p)?;
        if windows.is_empty() {
            too_short += 1;
        }
        let meta = SubjectMeta::from(&record);
        stored.extend(windows.into_iter().map(|window| StoredWindow {
            window,
            meta: meta.clone(),
        }));
    }
    write_store(&ws.windows, p.seq_len, p.fs_target, &stored)?;
    Ok(format!(
        "preprocess: {} records -> {} windows of {} samples at {} Hz ({} records too short) -> {}",
        manifest.records.len(),
        stored.len(),
        p.seq_len,
        p.fs_target,
        too_short,
        ws.rel(&ws.windows)
    ))
}

/// Labels stored windows for `task`, dropping those without the needed
/// metadata.
fn labeled(stored: Vec<StoredWindow>, task: Task) -> (LabelVocab, Vec<LabeledWindow>) {
    let metas: Vec<SubjectMeta> = stored.iter().map(|s| s.meta.clone()).collect();
    let vocab = build_vocab(&metas, task);
    let mut out = Vec::with_capacity(stored.len());
    let mut dropped = 0;
    for s in stored {
        match vocab.label(&s.meta) {
            Some(label) => out.push(LabeledWindow {
                window: s.window,
                label,
                task,
            }),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!("{dropped} windows lack {task} metadata and were left out");
    }
    (vocab, out)
}

struct Prepared {
    vocab: LabelVocab,
    data: Vec<LabeledWindow>,
    plan: SplitPlan,
}

fn prepare(cfg: &RunConfig, ws: &Workspace) -> Result<Prepared> {
    let (index, stored) = read_store(&ws.windows)?;
    if index.seq_len != cfg.preprocess.seq_len {
        return Err(Error::Config {
            field: "preprocess.seq_len".into(),
            message: format!("window store holds {}-sample windows", index.seq_len),
        });
    }
    let (vocab, data) = labeled(stored, cfg.task);
    let plan = make_split(&data, cfg.task, derive_seed(cfg.seed, SeedStream::Split))?;
    info!(
        "split ({:?}): {} train, {} val, {} test windows",
        plan.mode,
        plan.train.len(),
        plan.val.len(),
        plan.test.len()
    );
    Ok(Prepared { vocab, data, plan })
}

pub fn train_cmd(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    let Prepared { vocab, data, plan } = prepare(cfg, ws)?;
    let vit = cfg.vit(vocab.len());
    let init = init_params(&vit, derive_seed(cfg.seed, SeedStream::Init))?;
    let outcome = train(&vit, init, &data, &plan, &cfg.train_config())?;
    let ckpt = Checkpoint::new(vit, vocab, outcome.best_params)?;
    std::fs::create_dir_all(&ws.model).map_err(|e| Error::io(&ws.model, e))?;
    ckpt.save(&ws.checkpoint())?;
    write_text(&ws.model.join(TRAIN_REPORT_FILE), &to_sorted_json(&outcome.report)?)?;
    let r = &outcome.report;
    let test = r
        .test
        .as_ref()
        .map(|m| format!("{:.3}", m.accuracy))
        .unwrap_or_else(|| "n/a".into());
    Ok(format!(
        "train: task {}, {} epochs, best epoch {} (val acc {:.3}), test acc {test} -> {}",
        cfg.task,
        r.epochs.len(),
        r.best_epoch,
        r.best_val_accuracy,
        ws.rel(&ws.checkpoint())
    ))
}

fn load_checkpoint(cfg: &RunConfig, ws: &Workspace) -> Result<Checkpoint> {
    let path = ws.checkpoint();
    if !path.exists() {
        return Err(Error::invalid(format!(
            "checkpoint {} not found; run `ecgvit train` first",
            path.display()
        )));
    }
    let ckpt = Checkpoint::load(&path)?;
    if ckpt.vocab.task != cfg.task {
        return Err(Error::Config {
            field: "task".into(),
            message: format!("checkpoint was trained for task {}", ckpt.vocab.task),
        });
    }
    Ok(ckpt)
}

fn test_windows(prep: &Prepared) -> Result<Vec<usize>> {
    if prep.plan.test.is_empty() {
        return Err(Error::invalid("the split left no test windows"));
    }
    Ok(prep.plan.test.clone())
}

pub fn evaluate_cmd(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    let ckpt = load_checkpoint(cfg, ws)?;
    let prep = prepare(cfg, ws)?;
    if prep.vocab != ckpt.vocab {
        return Err(Error::invalid("label vocabulary differs from the checkpoint's"));
    }
    let idx = test_windows(&prep)?;
    let xs: Vec<&[f64]> = idx.iter().map(|&i| prep.data[i].window.samples.as_slice()).collect();
    let ys: Vec<usize> = idx.iter().map(|&i| prep.data[i].label).collect();
    let metrics = evaluate(&ckpt.params, &ckpt.config, &xs, &ys, cfg.task, cfg.train.batch_size)?;
    let doc = serde_json::json!({
        "task": cfg.task,
        "classes": ckpt.vocab.classes,
        "n_test_windows": idx.len(),
        "metrics": metrics,
    });
    let path = ws.reports.join(METRICS_FILE);
    write_text(&path, &to_sorted_json(&doc)?)?;
    let auc = metrics
        .macro_auc
        .map(|a| format!("{a:.3}"))
        .unwrap_or_else(|| "n/a".into());
    Ok(format!(
        "evaluate: task {}, {} test windows, accuracy {:.3}, macro F1 {:.3}, macro AUC {auc} -> {}",
        cfg.task,
        idx.len(),
        metrics.accuracy,
        metrics.macro_f1,
        ws.rel(&path)
    ))
}

pub fn explain_cmd(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    let ckpt = load_checkpoint(cfg, ws)?;
    let prep = prepare(cfg, ws)?;
    let idx = test_windows(&prep)?;
    let windows: Vec<_> = idx.iter().map(|&i| &prep.data[i].window).collect();
    let ex = explain_windows(&ckpt.params, &ckpt.config, &windows, cfg.task, cfg.train.batch_size)?;
    let rep = &ex.representative;
    emit_report(
        &ws.reports,
        &ex.report,
        &rep.importance,
        &windows[rep.index].samples,
        &rep.intervals,
        ckpt.config.patch_size,
    )?;
    let top: Vec<String> = ex
        .report
        .top3
        .iter()
        .map(|f| format!("{} {:.2}%", f.feature, f.percent))
        .collect();
    Ok(format!(
        "explain: task {}, {} windows attributed ({} skipped), top: {} -> {}",
        cfg.task,
        ex.report.n_windows,
        ex.skipped,
        top.join(", "),
        ws.rel(&ws.reports)
    ))
}
