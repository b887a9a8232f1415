//! Model checkpoint: `"ECGVCKPT"`, a `u64` little-endian header length,
//! a JSON header (model config and label vocabulary, keys sorted), then
//! the tensor container.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{VitConfig, VitParams};
use crate::autodiff::{decode_tensors, encode_tensors, Tensor};
use crate::data_io::LabelVocab;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECGVCKPT";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: VitConfig,
    pub vocab: LabelVocab,
    pub params: VitParams,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: VitConfig,
    vocab: LabelVocab,
}

impl Checkpoint {
    pub fn new(config: VitConfig, vocab: LabelVocab, params: VitParams) -> Result<Self> {
        config.validate()?;
        if vocab.len() != config.n_classes {
            return Err(Error::Config {
                field: "n_classes".into(),
                message: format!("{} classes but vocabulary has {}", config.n_classes, vocab.len()),
            });
        }
        params.validate(&config)?;
        Ok(Checkpoint { config, vocab, params })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_value(Header {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
        })?;
        let header = serde_json::to_vec(&header)?;
        let named = self.params.named();
        let body = encode_tensors(named.iter().map(|(n, t)| (n.as_str(), *t)));
        let mut out = Vec::with_capacity(16 + header.len() + body.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 16 || &buf[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let len = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let end = 16usize
            .checked_add(len)
            .filter(|&e| e <= buf.len())
            .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(&buf[16..end])?;
        let tensors: Vec<(String, Tensor)> = decode_tensors(&buf[end..])?;
        let params = VitParams::from_named(&header.config, tensors)?;
        Checkpoint::new(header.config, header.vocab, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&buf)
    }
}
