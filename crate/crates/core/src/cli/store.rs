//! Preprocessed windows on disk: `windows.bin` holds the samples as
//! little-endian `f64`, `windows.json` indexes them in the same order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::SubjectMeta;
use crate::error::{Error, Result};
use crate::signal::EcgWindow;

pub const STORE_BIN: &str = "windows.bin";
pub const STORE_INDEX: &str = "windows.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub seq_len: usize,
    pub fs: f64,
    pub entries: Vec<StoreEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub meta: SubjectMeta,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredWindow {
    pub window: EcgWindow,
    pub meta: SubjectMeta,
}

pub fn write_store(dir: &Path, seq_len: usize, fs_hz: f64, windows: &[StoredWindow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bin = Vec::with_capacity(windows.len() * seq_len * 8);
    let mut entries = Vec::with_capacity(windows.len());
    for w in windows {
        if w.window.samples.len() != seq_len {
            return Err(Error::invalid(format!(
                "window of {} has {} samples, store holds {seq_len}",
                w.window.subject_id,
                w.window.samples.len()
            )));
        }
        for v in &w.window.samples {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        entries.push(StoreEntry {
            meta: w.meta.clone(),
            offset: w.window.source_offset,
        });
    }
    let index = StoreIndex {
        seq_len,
        fs: fs_hz,
        entries,
    };
    let bin_path = dir.join(STORE_BIN);
    fs::write(&bin_path, bin).map_err(|e| Error::io(&bin_path, e))?;
    let idx_path = dir.join(STORE_INDEX);
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(&index)?)?;
    text.push('\n');
    fs::write(&idx_path, text).map_err(|e| Error::io(&idx_path, e))
}

pub fn read_store(dir: &Path) -> Result<(StoreIndex, Vec<StoredWindow>)> {
    let idx_path = dir.join(STORE_INDEX);
    let text = fs::read_to_string(&idx_path).map_err(|e| Error::io(&idx_path, e))?;
    let index: StoreIndex = serde_json::from_str(&text)?;
    let bin_path = dir.join(STORE_BIN);
    let bin = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let stride = index.seq_len * 8;
    if bin.len() != stride * index.entries.len() {
        return Err(Error::Format(format!(
            "{} holds {} bytes, index expects {}",
            bin_path.display(),
            bin.len(),
            stride * index.entries.len()
        )));
    }
    let windows = index
        .entries
        .iter()
        .zip(bin.chunks_exact(stride.max(1)))
        .map(|(e, chunk)| StoredWindow {
            window: EcgWindow {
                subject_id: e.meta.subject_id.clone(),
                samples: chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
                fs: index.fs,
                source_offset: e.offset,
            },
            meta: e.meta.clone(),
        })
        .collect();
    Ok((index, windows))
}
