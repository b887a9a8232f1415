use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VitConfig {
    pub seq_len: usize,
    pub patch_size: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub mlp_dim: usize,
    pub n_classes: usize,
    pub survival_prob: f64,
    pub ln_eps: f64,
}

impl Default for VitConfig {
    fn default() -> Self {
        VitConfig {
            seq_len: 2000,
            patch_size: 20,
            hidden_dim: 256,
            n_layers: 6,
            n_heads: 6,
            mlp_dim: 128,
            n_classes: 2,
            survival_prob: 0.8,
            ln_eps: 1e-6,
        }
    }
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: name.to_string(),
        message: message.into(),
    }
}

impl VitConfig {
    pub fn n_patches(&self) -> usize {
        self.seq_len / self.patch_size
    }

    /// Tokens per sequence including the class token.
    pub fn n_tokens(&self) -> usize {
        self.n_patches() + 1
    }

    /// `floor(D / H)`; when `H` does not divide `D` the concatenated heads
    /// are narrower than the model and `W_O` maps back up to `D`.
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads.max(1)
    }

    pub fn attn_dim(&self) -> usize {
        self.head_dim() * self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(field("patch_size", "must be positive"));
        }
        if self.seq_len == 0 || !self.seq_len.is_multiple_of(self.patch_size) {
            return Err(field(
                "seq_len",
                format!("{} is not a positive multiple of patch_size {}", self.seq_len, self.patch_size),
            ));
        }
        if self.hidden_dim < 2 {
            return Err(field("hidden_dim", "must be at least 2"));
        }
        if self.n_heads == 0 || self.n_heads > self.hidden_dim {
            return Err(field("n_heads", format!("must be in 1..={}", self.hidden_dim)));
        }
        if self.n_layers == 0 {
            return Err(field("n_layers", "must be positive"));
        }
        if self.mlp_dim == 0 {
            return Err(field("mlp_dim", "must be positive"));
        }
        if self.n_classes < 2 {
            return Err(field("n_classes", "need at least two classes"));
        }
        if !(self.survival_prob > 0.0 && self.survival_prob <= 1.0) {
            return Err(field("survival_prob", "must lie in (0, 1]"));
        }
        if !(self.ln_eps > 0.0 && self.ln_eps.is_finite()) {
            return Err(field("ln_eps", "must be positive"));
        }
        Ok(())
    }
}
