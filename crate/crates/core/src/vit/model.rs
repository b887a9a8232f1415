//! Forward pass built on the autodiff tape.
//!
//! Patch embedding is written as flatten-then-project; a 1D convolution
//! with kernel and stride equal to the patch size is the same operator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LayerParams, VitConfig, VitParams};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
    pub w_o: Var,
    pub ln1_gamma: Var,
    pub ln1_beta: Var,
    pub ln2_gamma: Var,
    pub ln2_beta: Var,
    pub w1: Var,
    pub w2: Var,
}

/// Parameters recorded as leaves on a tape.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub embed: Var,
    pub pos_embed: Var,
    pub class_token: Var,
    pub layers: Vec<LayerVars>,
    pub head_w: Var,
    pub head_b: Var,
}

impl ParamVars {
    pub fn bind(tape: &mut Tape, params: &VitParams, requires_grad: bool) -> Self {
        let mut leaf = |t: &Tensor| tape.leaf(t.clone(), requires_grad);
        let embed = leaf(&params.embed);
        let pos_embed = leaf(&params.pos_embed);
        let class_token = leaf(&params.class_token);
        let layers = params
            .layers
            .iter()
            .map(|l: &LayerParams| LayerVars {
                w_q: leaf(&l.w_q),
                w_k: leaf(&l.w_k),
                w_v: leaf(&l.w_v),
                w_o: leaf(&l.w_o),
                ln1_gamma: leaf(&l.ln1_gamma),
                ln1_beta: leaf(&l.ln1_beta),
                ln2_gamma: leaf(&l.ln2_gamma),
                ln2_beta: leaf(&l.ln2_beta),
                w1: leaf(&l.w1),
                w2: leaf(&l.w2),
            })
            .collect();
        let head_w = leaf(&params.head_w);
        let head_b = leaf(&params.head_b);
        ParamVars {
            embed,
            pos_embed,
            class_token,
            layers,
            head_w,
            head_b,
        }
    }

    /// Same order as [`VitParams::named`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![self.embed, self.pos_embed, self.class_token];
        for l in &self.layers {
            out.extend([
                l.w_q,
                l.w_k,
                l.w_v,
                l.w_o,
                l.ln1_gamma,
                l.ln1_beta,
                l.ln2_gamma,
                l.ln2_beta,
                l.w1,
                l.w2,
            ]);
        }
        out.push(self.head_w);
        out.push(self.head_b);
        out
    }
}

/// Handles into a recorded forward pass.
#[derive(Clone, Debug)]
pub struct Graph {
    /// `[B, K]`
    pub logits: Var,
    /// Per layer, `[B, H, N+1, N+1]`.
    pub attention: Vec<Var>,
    /// `[B, D]`
    pub class_token: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardArtifacts {
    pub logits: Tensor,
    pub probs: Tensor,
    /// Empty unless attention capture was requested.
    pub attention: Vec<Tensor>,
    pub final_class_token: Tensor,
}

/// Stacks windows into `[B, N, P]`.
pub fn patch_input(windows: &[&[f64]], cfg: &VitConfig) -> Result<Tensor> {
    if windows.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut data = Vec::with_capacity(windows.len() * cfg.seq_len);
    for (i, w) in windows.iter().enumerate() {
        if w.len() != cfg.seq_len {
            return Err(Error::invalid(format!(
                "window {i} has {} samples, model expects {}",
                w.len(),
                cfg.seq_len
            )));
        }
        data.extend_from_slice(w);
    }
    Tensor::new(vec![windows.len(), cfg.n_patches(), cfg.patch_size], data)
}

/// `[B, N, P]` patches to `[B, N+1, D]` tokens with the class token first.
pub fn embed(tape: &mut Tape, pv: &ParamVars, cfg: &VitConfig, patches: Var) -> Result<Var> {
    let b = tape.shape(patches)[0];
    let d = cfg.hidden_dim;
    let z = tape.matmul(patches, pv.embed)?;
    let cls = tape.reshape(pv.class_token, &[1, 1, d])?;
    let cls = tape.concat(&vec![cls; b], 0)?;
    let z = tape.concat(&[cls, z], 1)?;
    tape.add(z, pv.pos_embed)
}

/// Multi-head self-attention; returns the projected output and the
/// post-softmax attention weights `[B, H, T, T]`.
pub fn attention_block(tape: &mut Tape, lv: &LayerVars, cfg: &VitConfig, z: Var) -> Result<(Var, Var)> {
    let (b, t) = (tape.shape(z)[0], tape.shape(z)[1]);
    let (h, dh) = (cfg.n_heads, cfg.head_dim());
    let mut heads = |w: Var| -> Result<Var> {
        let x = tape.matmul(z, w)?;
        let x = tape.reshape(x, &[b, t, h, dh])?;
        tape.permute(x, &[0, 2, 1, 3])
    };
    let q = heads(lv.w_q)?;
    let k = heads(lv.w_k)?;
    let v = heads(lv.w_v)?;
    let kt = tape.transpose(k, 2, 3)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
    let attn = tape.softmax(scores, 3)?;
    let ctx = tape.matmul(attn, v)?;
    let ctx = tape.permute(ctx, &[0, 2, 1, 3])?;
    let ctx = tape.reshape(ctx, &[b, t, h * dh])?;
    Ok((tape.matmul(ctx, lv.w_o)?, attn))
}

pub fn feed_forward(tape: &mut Tape, lv: &LayerVars, z: Var) -> Result<Var> {
    let x = tape.matmul(z, lv.w1)?;
    let x = tape.gelu(x);
    tape.matmul(x, lv.w2)
}

/// Per-sample residual-branch factors for one layer: `1/p` when the
/// branch survives, `0` when it is dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct DropMasks {
    pub attention: Vec<f64>,
    pub feed_forward: Vec<f64>,
}

impl DropMasks {
    pub fn sample(rng: &mut ChaCha8Rng, batch: usize, survival_prob: f64) -> Self {
        let mut draw = || -> Vec<f64> {
            (0..batch)
                .map(|_| {
                    if rng.gen::<f64>() < survival_prob {
                        1.0 / survival_prob
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let attention = draw();
        let feed_forward = draw();
        DropMasks {
            attention,
            feed_forward,
        }
    }
}

fn drop_path(tape: &mut Tape, x: Var, factors: Option<&[f64]>) -> Result<Var> {
    match factors {
        Some(f) if f.iter().any(|&v| v != 1.0) => tape.scale_batch(x, f),
        _ => Ok(x),
    }
}

/// Post-norm encoder layer:
/// `Z' = LN(Z + MHSA(Z))`, `Z_out = LN(Z' + FFN(Z'))`.
pub fn encoder_block(
    tape: &mut Tape,
    lv: &LayerVars,
    cfg: &VitConfig,
    z: Var,
    masks: Option<&DropMasks>,
) -> Result<(Var, Var)> {
    let (m, attn) = attention_block(tape, lv, cfg, z)?;
    let m = drop_path(tape, m, masks.map(|d| d.attention.as_slice()))?;
    let z1 = tape.add(z, m)?;
    let z1 = tape.layer_norm(z1, lv.ln1_gamma, lv.ln1_beta, cfg.ln_eps)?;
    let f = feed_forward(tape, lv, z1)?;
    let f = drop_path(tape, f, masks.map(|d| d.feed_forward.as_slice()))?;
    let z2 = tape.add(z1, f)?;
    let z2 = tape.layer_norm(z2, lv.ln2_gamma, lv.ln2_beta, cfg.ln_eps)?;
    Ok((z2, attn))
}

/// Records the full model on `tape`. Passing an RNG enables stochastic
/// depth (training mode).
pub fn build_graph(
    tape: &mut Tape,
    pv: &ParamVars,
    cfg: &VitConfig,
    windows: &[&[f64]],
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Graph> {
    let x = patch_input(windows, cfg)?;
    let b = windows.len();
    let x = tape.constant(x);
    let mut z = embed(tape, pv, cfg, x)?;
    let mut attention = Vec::with_capacity(pv.layers.len());
    for lv in &pv.layers {
        let masks = rng.as_deref_mut().map(|r| DropMasks::sample(r, b, cfg.survival_prob));
        let (next, attn) = encoder_block(tape, lv, cfg, z, masks.as_ref())?;
        attention.push(attn);
        z = next;
    }
    let cls = tape.slice(z, 1, 0, 1)?;
    let cls = tape.reshape(cls, &[b, cfg.hidden_dim])?;
    let logits = tape.linear(cls, pv.head_w, Some(pv.head_b))?;
    Ok(Graph {
        logits,
        attention,
        class_token: cls,
    })
}

/// Runs the model without recording gradients.
pub fn forward(
    params: &VitParams,
    cfg: &VitConfig,
    windows: &[&[f64]],
    rng: Option<&mut ChaCha8Rng>,
    capture_attention: bool,
) -> Result<ForwardArtifacts> {
    let mut tape = Tape::new();
    let pv = ParamVars::bind(&mut tape, params, false);
    let g = build_graph(&mut tape, &pv, cfg, windows, rng)?;
    let probs = tape.softmax(g.logits, 1)?;
    let attention = if capture_attention {
        g.attention.iter().map(|&a| tape.value(a).clone()).collect()
    } else {
        Vec::new()
    };
    Ok(ForwardArtifacts {
        logits: tape.value(g.logits).clone(),
        probs: tape.value(probs).clone(),
        attention,
        final_class_token: tape.value(g.class_token).clone(),
    })
}

/// Token embeddings `[N+1, D]` of a single window.
pub fn embed_patches(window: &[f64], params: &VitParams, cfg: &VitConfig) -> Result<Tensor> {
    let mut tape = Tape::new();
    let pv = ParamVars::bind(&mut tape, params, false);
    let x = tape.constant(patch_input(&[window], cfg)?);
    let z = embed(&mut tape, &pv, cfg, x)?;
    tape.value(z).clone().reshaped(vec![cfg.n_tokens(), cfg.hidden_dim])
}

fn bind_layer(tape: &mut Tape, layer: &LayerParams) -> LayerVars {
    let mut c = |t: &Tensor| tape.constant(t.clone());
    LayerVars {
        w_q: c(&layer.w_q),
        w_k: c(&layer.w_k),
        w_v: c(&layer.w_v),
        w_o: c(&layer.w_o),
        ln1_gamma: c(&layer.ln1_gamma),
        ln1_beta: c(&layer.ln1_beta),
        ln2_gamma: c(&layer.ln2_gamma),
        ln2_beta: c(&layer.ln2_beta),
        w1: c(&layer.w1),
        w2: c(&layer.w2),
    }
}

fn batched(z: &Tensor) -> Result<Tensor> {
    let mut shape = vec![1];
    shape.extend_from_slice(z.shape());
    z.clone().reshaped(shape)
}

/// Self-attention over one token matrix `[T, D]`; returns the output
/// `[T, D]` and attention `[H, T, T]`.
pub fn mhsa(z: &Tensor, layer: &LayerParams, cfg: &VitConfig) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let lv = bind_layer(&mut tape, layer);
    let zv = tape.constant(batched(z)?);
    let (out, attn) = attention_block(&mut tape, &lv, cfg, zv)?;
    let t = z.shape()[0];
    Ok((
        tape.value(out).clone().reshaped(z.shape().to_vec())?,
        tape.value(attn).clone().reshaped(vec![cfg.n_heads, t, t])?,
    ))
}

/// One encoder layer over `[T, D]`; an RNG enables stochastic depth.
pub fn encoder_layer(
    z: &Tensor,
    layer: &LayerParams,
    cfg: &VitConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let lv = bind_layer(&mut tape, layer);
    let zv = tape.constant(batched(z)?);
    let masks = rng.map(|r| DropMasks::sample(r, 1, cfg.survival_prob));
    let (out, _) = encoder_block(&mut tape, &lv, cfg, zv, masks.as_ref())?;
    tape.value(out).clone().reshaped(z.shape().to_vec())
}
