//! Deterministic preprocessing of single-lead ECG traces.
//!
//! The standard chain is bandpass -> median -> resample -> window, with
//! min-max normalization applied per window. See [`preprocess_record`].

mod filter;
mod median;
mod resample;
mod window;

pub use filter::{design_butterworth_bandpass, filtfilt, sosfilt, Biquad, BiquadCascade, FilterSpec};
pub use median::median_filter;
pub use resample::resample;
pub use window::{minmax_normalize, window, EcgWindow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

/// A raw single-lead trace in millivolts.
#[derive(Clone, Debug, PartialEq)]
pub struct EcgRecord {
    pub subject_id: String,
    pub samples: Vec<f64>,
    pub fs: f64,
    pub gender: Option<Gender>,
    pub age_years: Option<u32>,
}

impl EcgRecord {
    pub fn new(subject_id: impl Into<String>, samples: Vec<f64>, fs: f64) -> Result<Self> {
        let record = EcgRecord {
            subject_id: subject_id.into(),
            samples,
            fs,
            gender: None,
            age_years: None,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid(format!("record {} has no samples", self.subject_id)));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::invalid(format!(
                "record {} has invalid sampling rate {}",
                self.subject_id, self.fs
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "record {} sample {}",
                self.subject_id, i
            )));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// Parameters of the preprocessing chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    pub filter_order: usize,
    /// Median kernel width in milliseconds; converted to the nearest odd
    /// sample count at the record's native rate.
    pub median_kernel_ms: f64,
    pub fs_target: f64,
    pub seq_len: usize,
    pub stride: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            low_hz: 0.5,
            high_hz: 40.0,
            filter_order: 4,
            median_kernel_ms: 20.0,
            fs_target: 250.0,
            seq_len: 2000,
            stride: 2000,
        }
    }
}

impl PreprocessConfig {
    pub fn median_kernel_samples(&self, fs: f64) -> usize {
        let k = (self.median_kernel_ms * 1e-3 * fs).round().max(1.0) as usize;
        if k.is_multiple_of(2) {
            k + 1
        } else {
            k
        }
    }
}

/// Runs the full chain on one record. Records too short to yield a single
/// window return an empty list (and are logged).
pub fn preprocess_record(record: &EcgRecord, cfg: &PreprocessConfig) -> Result<Vec<EcgWindow>> {
    record.validate()?;
    let spec = FilterSpec::new(cfg.low_hz, cfg.high_hz, cfg.filter_order, record.fs)?;
    let cascade = design_butterworth_bandpass(&spec)?;
    let filtered = filtfilt(&cascade, &record.samples)?;
    let kernel = cfg.median_kernel_samples(record.fs).min(odd_floor(filtered.len()));
    let smoothed = median_filter(&filtered, kernel)?;
    let resampled = if (record.fs - cfg.fs_target).abs() < f64::EPSILON {
        smoothed
    } else {
        resample(&smoothed, record.fs, cfg.fs_target)?
    };
    let mut windows = window(&record.subject_id, &resampled, cfg.fs_target, cfg.seq_len, cfg.stride)?;
    for w in &mut windows {
        w.samples = minmax_normalize(&w.samples)?;
    }
    Ok(windows)
}

fn odd_floor(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n.saturating_sub(1).max(1)
    } else {
        n
    }
}
