use serde::{Deserialize, Serialize};

use super::ms;
use crate::error::{Error, Result};
use crate::signal::{design_butterworth_bandpass, filtfilt, FilterSpec};

pub const REFRACTORY_S: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RPeakList {
    pub indices: Vec<usize>,
    pub fs: f64,
}

impl RPeakList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

struct Stages {
    integrated: Vec<f64>,
}

fn stages(x: &[f64], fs: f64) -> Result<Stages> {
    let cascade = design_butterworth_bandpass(&FilterSpec::new(5.0, 15.0, 2, fs)?)?;
    let bandpassed = filtfilt(&cascade, x)?;
    let n = x.len();
    let at = |i: isize| bandpassed[i.clamp(0, n as isize - 1) as usize];

    // five-point derivative, centred so it adds no delay
    let squared: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (-at(i - 2) - 2.0 * at(i - 1) + 2.0 * at(i + 1) + at(i + 2)) * fs / 8.0;
            d * d
        })
        .collect();

    let width = ms(fs, 150.0).max(1);
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &squared {
        prefix.push(prefix.last().unwrap() + v);
    }
    let integrated = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect();
    Ok(Stages { integrated })
}

fn local_maxima(y: &[f64]) -> Vec<usize> {
    let n = y.len();
    (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { y[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { y[i + 1] };
            y[i] > 0.0 && y[i] > left && y[i] >= right
        })
        .collect()
}

struct Levels {
    signal: f64,
    noise: f64,
}

impl Levels {
    fn threshold(&self) -> f64 {
        self.noise + 0.25 * (self.signal - self.noise)
    }
}

/// Pan-Tompkins QRS detection: 5-15 Hz bandpass, derivative, squaring,
/// 150 ms moving-window integration and dual adaptive thresholds with a
/// 200 ms refractory period and RR-based search-back. Detections are
/// refined to the maximum of the input within +-125 ms (half the
/// integration window plus 50 ms), since the first integrator maximum can
/// sit anywhere on the integrated plateau.
pub fn pan_tompkins(x: &[f64], fs: f64) -> Result<RPeakList> {
    if fs < 100.0 {
        return Err(Error::invalid(format!("pan_tompkins needs fs >= 100 Hz, got {fs}")));
    }
    if (x.len() as f64) < 2.0 * fs {
        return Err(Error::invalid(format!(
            "pan_tompkins needs at least 2 s of signal, got {} samples at {fs} Hz",
            x.len()
        )));
    }
    let Stages { integrated, .. } = stages(x, fs)?;
    let learn = &integrated[..(2.0 * fs) as usize];
    let peak_level = learn.iter().cloned().fold(0.0, f64::max);
    if !(peak_level > 0.0) {
        return Ok(RPeakList {
            indices: Vec::new(),
            fs,
        });
    }
    let mut levels = Levels {
        signal: 0.25 * peak_level,
        noise: 0.5 * learn.iter().sum::<f64>() / learn.len() as f64,
    };

    let refractory = ms(fs, REFRACTORY_S * 1e3);
    let mut qrs: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let candidates = local_maxima(&integrated);

    for &i in &candidates {
        if let (Some(&last), true) = (qrs.last(), qrs.len() >= 2) {
            let rr: Vec<usize> = qrs.windows(2).rev().take(8).map(|w| w[1] - w[0]).collect();
            let rr_avg = rr.iter().sum::<usize>() as f64 / rr.len() as f64;
            if (i - last) as f64 > 1.66 * rr_avg {
                let thr2 = 0.5 * levels.threshold();
                let best = pending
                    .iter()
                    .copied()
                    .filter(|&j| j >= last + refractory && i >= j + refractory && integrated[j] > thr2)
                    .max_by(|&a, &b| integrated[a].total_cmp(&integrated[b]));
                if let Some(j) = best {
                    qrs.push(j);
                    levels.signal = 0.25 * integrated[j] + 0.75 * levels.signal;
                }
                pending.clear();
            }
        }

        let value = integrated[i];
        let clear_of_refractory = qrs.last().is_none_or(|&last| i >= last + refractory);
        if value > levels.threshold() && clear_of_refractory {
            qrs.push(i);
            levels.signal = 0.125 * value + 0.875 * levels.signal;
            pending.clear();
        } else {
            levels.noise = 0.125 * value + 0.875 * levels.noise;
            pending.push(i);
        }
    }

    let reach = ms(fs, 75.0 + 50.0);
    let n = x.len();
    let mut indices: Vec<usize> = Vec::with_capacity(qrs.len());
    for q in qrs {
        let lo = q.saturating_sub(reach);
        let hi = (q + reach + 1).min(n);
        let r = (lo..hi)
            .max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)))
            .unwrap_or(q);
        match indices.last() {
            Some(&prev) if r < prev + refractory => {
                if x[r] > x[prev] {
                    *indices.last_mut().unwrap() = r;
                }
            }
            _ => indices.push(r),
        }
    }
    Ok(RPeakList { indices, fs })
}
