use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::EcgRecord;

/// One Gaussian bump, placed relative to the beat's R anchor. `width_ms`
/// is the standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveShape {
    pub offset_ms: f64,
    pub amplitude: f64,
    pub width_ms: f64,
}

impl WaveShape {
    pub const fn new(offset_ms: f64, amplitude: f64, width_ms: f64) -> Self {
        WaveShape {
            offset_ms,
            amplitude,
            width_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEcgSpec {
    pub bpm: f64,
    pub duration_s: f64,
    pub fs: f64,
    pub p: WaveShape,
    pub q: WaveShape,
    pub r: WaveShape,
    pub s: WaveShape,
    pub t: WaveShape,
    pub noise_std: f64,
    /// Time of the first R anchor.
    pub phase_s: f64,
    pub seed: u64,
}

impl Default for SyntheticEcgSpec {
    fn default() -> Self {
        SyntheticEcgSpec {
            bpm: 60.0,
            duration_s: 8.0,
            fs: 250.0,
            p: WaveShape::new(-180.0, 0.12, 25.0),
            q: WaveShape::new(-30.0, -0.1, 10.0),
            r: WaveShape::new(0.0, 1.0, 12.0),
            s: WaveShape::new(30.0, -0.15, 10.0),
            t: WaveShape::new(250.0, 0.3, 60.0),
            noise_std: 0.0,
            phase_s: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticEcgSpec {
    pub fn validate(&self) -> Result<()> {
        if !(30.0..=220.0).contains(&self.bpm) {
            return Err(Error::invalid(format!("bpm {} outside [30, 220]", self.bpm)));
        }
        if self.fs < 100.0 {
            return Err(Error::invalid(format!("fs {} below 100 Hz", self.fs)));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("duration must be positive"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::invalid("noise_std must be non-negative"));
        }
        if self.waves().iter().any(|w| !(w.width_ms > 0.0)) {
            return Err(Error::invalid("wave widths must be positive"));
        }
        Ok(())
    }

    fn waves(&self) -> [WaveShape; 5] {
        [self.p, self.q, self.r, self.s, self.t]
    }

    pub fn rr_s(&self) -> f64 {
        60.0 / self.bpm
    }
}

/// Wave centers of one beat, in (fractional) sample positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatTruth {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticTruth {
    /// Beats whose R anchor lies inside the record.
    pub beats: Vec<BeatTruth>,
}

impl SyntheticTruth {
    pub fn r_peaks(&self) -> Vec<f64> {
        self.beats.iter().map(|b| b.r).collect()
    }
}

/// Renders a sum-of-Gaussians ECG. Beats just outside the record are also
/// rendered so their tails spill in, but only in-record beats are reported.
pub fn synthesize(spec: &SyntheticEcgSpec, subject_id: &str) -> Result<(EcgRecord, SyntheticTruth)> {
    spec.validate()?;
    let n = (spec.duration_s * spec.fs).round() as usize;
    let rr = spec.rr_s();
    let ms_to_samples = spec.fs * 1e-3;
    let mut samples = vec![0.0; n];
    let mut truth = SyntheticTruth::default();

    let mut k: i64 = -1;
    loop {
        let anchor = (spec.phase_s + k as f64 * rr) * spec.fs;
        if anchor > n as f64 + 0.6 * spec.fs {
            break;
        }
        for w in spec.waves() {
            let center = anchor + w.offset_ms * ms_to_samples;
            let sigma = w.width_ms * ms_to_samples;
            let lo = (center - 6.0 * sigma).floor().max(0.0) as usize;
            let hi = ((center + 6.0 * sigma).ceil().max(0.0) as usize).min(n);
            for (i, v) in samples.iter_mut().enumerate().take(hi).skip(lo) {
                let d = (i as f64 - center) / sigma;
                *v += w.amplitude * (-0.5 * d * d).exp();
            }
        }
        if anchor >= 0.0 && anchor < n as f64 {
            let at = |w: WaveShape| anchor + w.offset_ms * ms_to_samples;
            truth.beats.push(BeatTruth {
                p: at(spec.p),
                q: at(spec.q),
                r: anchor,
                s: at(spec.s),
                t: at(spec.t),
            });
        }
        k += 1;
    }

    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
        for v in &mut samples {
            *v += normal.sample(&mut rng);
        }
    }
    let record = EcgRecord::new(subject_id, samples, spec.fs)?;
    Ok((record, truth))
}
