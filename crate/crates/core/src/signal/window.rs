use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-length model input cut from a resampled record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcgWindow {
    pub subject_id: String,
    pub samples: Vec<f64>,
    pub fs: f64,
    /// Sample index into the resampled record.
    pub source_offset: usize,
}

/// Maps `x` onto `[0, 1]`. A constant input maps to all zeros.
pub fn minmax_normalize(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("normalize on empty input"));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("normalize input sample {i}")));
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    Ok(x.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect())
}

/// Cuts `samples` into windows of `seq_len` every `stride` samples; the
/// trailing partial window is dropped.
pub fn window(
    subject_id: &str,
    samples: &[f64],
    fs: f64,
    seq_len: usize,
    stride: usize,
) -> Result<Vec<EcgWindow>> {
    if seq_len == 0 || stride == 0 {
        return Err(Error::invalid("seq_len and stride must be positive"));
    }
    if samples.len() < seq_len {
        log::warn!(
            "record {subject_id} excluded: {} samples < window length {seq_len}",
            samples.len()
        );
        return Ok(Vec::new());
    }
    let windows = (0..=samples.len() - seq_len)
        .step_by(stride)
        .map(|offset| EcgWindow {
            subject_id: subject_id.to_string(),
            samples: samples[offset..offset + seq_len].to_vec(),
            fs,
            source_offset: offset,
        })
        .collect();
    Ok(windows)
}
