use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vit::{ForwardArtifacts, VitConfig, VitParams};

/// Class-token attention to each patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchImportance {
    /// `per_head[h][i]`: attention of the class token to patch `i`.
    pub per_head: Vec<Vec<f64>>,
    /// Head mean of `per_head`.
    pub importance: Vec<f64>,
}

impl PatchImportance {
    /// Builds the head mean from per-head scores.
    pub fn from_heads(per_head: Vec<Vec<f64>>) -> Result<Self> {
        let n = per_head.first().map(Vec::len).unwrap_or(0);
        if n == 0 || per_head.iter().any(|h| h.len() != n) {
            return Err(Error::invalid("per-head scores must be non-empty and equally long"));
        }
        let h = per_head.len() as f64;
        let importance = (0..n).map(|i| per_head.iter().map(|row| row[i]).sum::<f64>() / h).collect();
        Ok(PatchImportance { per_head, importance })
    }

    pub fn n_patches(&self) -> usize {
        self.importance.len()
    }

    pub fn n_heads(&self) -> usize {
        self.per_head.len()
    }
}

/// Row 0 (class token), columns `1..=N` of every head's attention in
/// `layer` (default: the last) for batch element `sample`.
pub fn extract_importance(
    artifacts: &ForwardArtifacts,
    sample: usize,
    layer: Option<usize>,
) -> Result<PatchImportance> {
    let Some(last) = artifacts.attention.len().checked_sub(1) else {
        return Err(Error::invalid("attention was not captured in this forward pass"));
    };
    let layer = layer.unwrap_or(last);
    let a = artifacts
        .attention
        .get(layer)
        .ok_or_else(|| Error::invalid(format!("no attention captured for layer {layer}")))?;
    let &[b, h, t, t2] = a.shape() else {
        return Err(Error::invalid(format!("attention has shape {:?}", a.shape())));
    };
    if t != t2 || t < 2 || sample >= b {
        return Err(Error::invalid(format!(
            "sample {sample} out of range for attention {:?}",
            a.shape()
        )));
    }
    let per_head = (0..h)
        .map(|head| {
            let row = ((sample * h + head) * t) * t;
            a.data()[row + 1..row + t].to_vec()
        })
        .collect();
    PatchImportance::from_heads(per_head)
}

/// Relative size of each head's block of rows in the output projection
/// `W_O` of `layer` (default: the last): Frobenius norms scaled so the
/// largest is exactly 1.
pub fn head_weights(params: &VitParams, cfg: &VitConfig, layer: Option<usize>) -> Result<Vec<f64>> {
    let layer = layer.unwrap_or(cfg.n_layers.saturating_sub(1));
    let w_o = &params
        .layers
        .get(layer)
        .ok_or_else(|| Error::invalid(format!("no layer {layer}")))?
        .w_o;
    let (dh, d) = (cfg.head_dim(), cfg.hidden_dim);
    if w_o.shape() != [cfg.attn_dim(), d] {
        return Err(Error::ShapeMismatch {
            op: "head_weights",
            lhs: w_o.shape().to_vec(),
            rhs: vec![cfg.attn_dim(), d],
        });
    }
    let raw: Vec<f64> = w_o
        .data()
        .chunks(dh * d)
        .map(|block| block.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(vec![1.0; raw.len()]);
    }
    Ok(raw.iter().map(|r| r / max).collect())
}
