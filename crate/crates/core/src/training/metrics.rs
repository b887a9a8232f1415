use serde::{Deserialize, Serialize};

use super::loss::cross_entropy;
use crate::autodiff::Tensor;
use crate::data_io::Task;
use crate::error::{Error, Result};

/// Classes listed for participant-ID runs, by test support.
pub const TOP_CLASSES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the class never occurs in the ground truth.
    pub absent: bool,
    /// One-vs-rest; `None` when the class has no positives or no negatives.
    pub auc: Option<f64>,
    /// `(false positive rate, true positive rate)` from (0,0) to (1,1).
    pub roc: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Mean over classes whose AUC is defined.
    pub macro_auc: Option<f64>,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub top_classes: Vec<usize>,
}

/// Index of the row maximum; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// One-vs-rest ROC points, grouping tied scores into one threshold step.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Option<Vec<[f64; 2]>> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut points = vec![[0.0, 0.0]];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push([fp as f64 / n_neg as f64, tp as f64 / n_pos as f64]);
    }
    Some(points)
}

/// Trapezoidal area under a curve given as ordered `(x, y)` points.
pub fn trapezoid_auc(points: &[[f64; 2]]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]) / 2.0)
        .sum()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from class probabilities `[n, K]` and true labels.
pub fn compute_metrics(probs: &Tensor, labels: &[usize], task: Task) -> Result<Metrics> {
    let shape = probs.shape();
    if shape.len() != 2 || shape[0] != labels.len() || labels.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            lhs: shape.to_vec(),
            rhs: vec![labels.len()],
        });
    }
    let k = shape[1];
    let loss = cross_entropy(probs, labels)?;
    let rows: Vec<&[f64]> = probs.data().chunks(k).collect();
    let mut confusion = vec![vec![0usize; k]; k];
    for (row, &y) in rows.iter().zip(labels) {
        confusion[y][argmax(row)] += 1;
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();

    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|r| r[c]).sum();
        let tp = confusion[c][c];
        let absent = support == 0;
        let (precision, recall) = if absent {
            (0.0, 0.0)
        } else {
            (ratio(tp, predicted), ratio(tp, support))
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let scores: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let positive: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        let roc = roc_curve(&scores, &positive);
        per_class.push(ClassMetrics {
            class: c,
            support,
            predicted,
            precision,
            recall,
            f1,
            absent,
            auc: roc.as_deref().map(trapezoid_auc),
            roc: roc.unwrap_or_default(),
        });
    }

    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let aucs: Vec<f64> = per_class.iter().filter_map(|c| c.auc).collect();
    let top_classes = if task == Task::ParticipantId {
        let mut by_support: Vec<&ClassMetrics> = per_class.iter().filter(|c| !c.absent).collect();
        by_support.sort_by(|a, b| b.support.cmp(&a.support).then(a.class.cmp(&b.class)));
        by_support.iter().take(TOP_CLASSES).map(|c| c.class).collect()
    } else {
        Vec::new()
    };
    Ok(Metrics {
        n: labels.len(),
        loss,
        accuracy: correct as f64 / labels.len() as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        macro_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        confusion,
        per_class,
        top_classes,
    })
}
