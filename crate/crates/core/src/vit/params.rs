use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::VitConfig;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
    pub ln1_gamma: Tensor,
    pub ln1_beta: Tensor,
    pub ln2_gamma: Tensor,
    pub ln2_beta: Tensor,
    pub w1: Tensor,
    pub w2: Tensor,
}

const LAYER_FIELDS: [&str; 10] = [
    "w_q", "w_k", "w_v", "w_o", "ln1_gamma", "ln1_beta", "ln2_gamma", "ln2_beta", "w1", "w2",
];

impl LayerParams {
    fn fields(&self) -> [&Tensor; 10] {
        [
            &self.w_q,
            &self.w_k,
            &self.w_v,
            &self.w_o,
            &self.ln1_gamma,
            &self.ln1_beta,
            &self.ln2_gamma,
            &self.ln2_beta,
            &self.w1,
            &self.w2,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Tensor; 10] {
        [
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.ln1_gamma,
            &mut self.ln1_beta,
            &mut self.ln2_gamma,
            &mut self.ln2_beta,
            &mut self.w1,
            &mut self.w2,
        ]
    }
}

/// All trainable tensors of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct VitParams {
    /// Patch projection `E`, `[P, D]`.
    pub embed: Tensor,
    /// `[N + 1, D]`
    pub pos_embed: Tensor,
    /// `[D]`
    pub class_token: Tensor,
    pub layers: Vec<LayerParams>,
    /// `[D, K]`
    pub head_w: Tensor,
    /// `[K]`
    pub head_b: Tensor,
}

fn expected_shapes(cfg: &VitConfig) -> Vec<(String, Vec<usize>)> {
    let (p, d, a, m, k) = (cfg.patch_size, cfg.hidden_dim, cfg.attn_dim(), cfg.mlp_dim, cfg.n_classes);
    let mut out = vec![
        ("embed".to_string(), vec![p, d]),
        ("pos_embed".to_string(), vec![cfg.n_tokens(), d]),
        ("class_token".to_string(), vec![d]),
    ];
    for l in 0..cfg.n_layers {
        let shapes = [
            vec![d, a],
            vec![d, a],
            vec![d, a],
            vec![a, d],
            vec![d],
            vec![d],
            vec![d],
            vec![d],
            vec![d, m],
            vec![m, d],
        ];
        for (name, shape) in LAYER_FIELDS.iter().zip(shapes) {
            out.push((format!("layers.{l}.{name}"), shape));
        }
    }
    out.push(("head.w".to_string(), vec![d, k]));
    out.push(("head.b".to_string(), vec![k]));
    out
}

impl VitParams {
    /// Tensors in canonical order with stable dotted names.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("embed".to_string(), &self.embed),
            ("pos_embed".to_string(), &self.pos_embed),
            ("class_token".to_string(), &self.class_token),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(layer.fields()) {
                out.push((format!("layers.{l}.{name}"), t));
            }
        }
        out.push(("head.w".to_string(), &self.head_w));
        out.push(("head.b".to_string(), &self.head_b));
        out
    }

    /// Same order as [`VitParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embed, &mut self.pos_embed, &mut self.class_token];
        for layer in &mut self.layers {
            out.extend(layer.fields_mut());
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn validate(&self, cfg: &VitConfig) -> Result<()> {
        let named = self.named();
        let expected = expected_shapes(cfg);
        if named.len() != expected.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {}",
                expected.len(),
                named.len()
            )));
        }
        for ((name, t), (_, shape)) in named.iter().zip(&expected) {
            if t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "params",
                    lhs: t.shape().to_vec(),
                    rhs: shape.clone(),
                });
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("parameter {name}")));
            }
        }
        Ok(())
    }

    /// Rebuilds parameters from named tensors, requiring exactly the
    /// names and shapes implied by `cfg`.
    pub fn from_named(cfg: &VitConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut map: BTreeMap<String, Tensor> = BTreeMap::new();
        for (name, t) in tensors {
            if map.insert(name.clone(), t).is_some() {
                return Err(Error::Format(format!("duplicate tensor {name}")));
            }
        }
        let mut take = |name: &str| {
            map.remove(name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
        };
        let embed = take("embed")?;
        let pos_embed = take("pos_embed")?;
        let class_token = take("class_token")?;
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let mut f = |n: &str| take(&format!("layers.{l}.{n}"));
            layers.push(LayerParams {
                w_q: f("w_q")?,
                w_k: f("w_k")?,
                w_v: f("w_v")?,
                w_o: f("w_o")?,
                ln1_gamma: f("ln1_gamma")?,
                ln1_beta: f("ln1_beta")?,
                ln2_gamma: f("ln2_gamma")?,
                ln2_beta: f("ln2_beta")?,
                w1: f("w1")?,
                w2: f("w2")?,
            });
        }
        let head_w = take("head.w")?;
        let head_b = take("head.b")?;
        if let Some(extra) = map.keys().next() {
            return Err(Error::Format(format!("unexpected tensor {extra}")));
        }
        let params = VitParams {
            embed,
            pos_embed,
            class_token,
            layers,
            head_w,
            head_b,
        };
        params.validate(cfg)?;
        Ok(params)
    }
}

/// Normal(0, std) restricted to ±2 std by redrawing.
fn trunc_normal(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    Tensor::from_fn(shape, |_| loop {
        let v: f64 = dist.sample(rng);
        if v.abs() <= 2.0 * std {
            break v;
        }
    })
}

pub fn init_params(cfg: &VitConfig, seed: u64) -> Result<VitParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, d, a, m, k) = (cfg.patch_size, cfg.hidden_dim, cfg.attn_dim(), cfg.mlp_dim, cfg.n_classes);
    let embed = trunc_normal(&mut rng, &[p, d], INIT_STD);
    let pos_embed = trunc_normal(&mut rng, &[cfg.n_tokens(), d], INIT_STD);
    let layers = (0..cfg.n_layers)
        .map(|_| LayerParams {
            w_q: trunc_normal(&mut rng, &[d, a], INIT_STD),
            w_k: trunc_normal(&mut rng, &[d, a], INIT_STD),
            w_v: trunc_normal(&mut rng, &[d, a], INIT_STD),
            w_o: trunc_normal(&mut rng, &[a, d], INIT_STD),
            ln1_gamma: Tensor::ones(&[d]),
            ln1_beta: Tensor::zeros(&[d]),
            ln2_gamma: Tensor::ones(&[d]),
            ln2_beta: Tensor::zeros(&[d]),
            w1: trunc_normal(&mut rng, &[d, m], INIT_STD),
            w2: trunc_normal(&mut rng, &[m, d], INIT_STD),
        })
        .collect();
    let head_w = trunc_normal(&mut rng, &[d, k], INIT_STD);
    Ok(VitParams {
        embed,
        pos_embed,
        class_token: Tensor::zeros(&[d]),
        layers,
        head_w,
        head_b: Tensor::zeros(&[k]),
    })
}
