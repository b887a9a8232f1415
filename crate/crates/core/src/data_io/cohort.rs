use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::synth::{synthesize, SyntheticEcgSpec, SyntheticTruth, WaveShape};
use crate::error::{Error, Result};
use crate::signal::{EcgRecord, Gender};

/// A population of synthetic subjects. Subjects alternate male/female;
/// the T wave is `gender_effect` taller in males, and every subject gets
/// its own multiplicative jitter on wave amplitudes, widths and timing so
/// individuals are distinguishable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub duration_s: f64,
    pub fs: f64,
    pub noise_std: f64,
    pub gender_effect: f64,
    /// Relative standard deviation of per-subject morphology factors.
    pub subject_jitter: f64,
    pub bpm_range: [f64; 2],
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_subjects: 8,
            duration_s: 64.0,
            fs: 500.0,
            noise_std: 0.02,
            gender_effect: 0.2,
            subject_jitter: 0.15,
            bpm_range: [55.0, 95.0],
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::invalid("cohort needs at least one subject"));
        }
        let [lo, hi] = self.bpm_range;
        if !(lo <= hi) {
            return Err(Error::invalid("bpm_range must be ordered"));
        }
        if !(self.subject_jitter >= 0.0 && self.subject_jitter < 1.0) {
            return Err(Error::invalid("subject_jitter must lie in [0, 1)"));
        }
        if !(self.gender_effect.abs() < 0.6) {
            return Err(Error::invalid("gender_effect must lie in (-0.6, 0.6)"));
        }
        Ok(())
    }
}

pub fn subject_id(k: usize) -> String {
    format!("S{k:03}")
}

/// Renders every subject of the cohort with its ground truth.
pub fn synthesize_cohort(spec: &CohortSpec) -> Result<Vec<(EcgRecord, SyntheticTruth)>> {
    spec.validate()?;
    let base = SyntheticEcgSpec::default();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(spec.n_subjects);
    for k in 0..spec.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64 + 1);
        let mut factor = || (1.0 + spec.subject_jitter * unit.sample(&mut rng)).clamp(0.5, 1.5);
        let gender = if k % 2 == 0 { Gender::Male } else { Gender::Female };
        let sign = if gender == Gender::Male { 0.5 } else { -0.5 };
        let jit = |w: WaveShape, a: f64, s: f64, o: f64| WaveShape::new(w.offset_ms * o, w.amplitude * a, w.width_ms * s);
        let p = jit(base.p, factor(), factor(), factor());
        let q = jit(base.q, factor(), factor(), 1.0);
        let r = jit(base.r, factor(), factor(), 1.0);
        let s = jit(base.s, factor(), factor(), 1.0);
        let t = WaveShape::new(
            base.t.offset_ms * factor(),
            (base.t.amplitude + sign * spec.gender_effect) * factor(),
            base.t.width_ms * factor(),
        );
        let bpm = rng.gen_range(spec.bpm_range[0]..=spec.bpm_range[1]);
        let age = rng.gen_range(12..=85);
        let phase_s = rng.gen_range(0.2..0.8);
        let noise_seed = rng.gen();
        let ecg = SyntheticEcgSpec {
            bpm,
            duration_s: spec.duration_s,
            fs: spec.fs,
            p,
            q,
            r,
            s,
            t,
            noise_std: spec.noise_std,
            phase_s,
            seed: noise_seed,
        };
        let (mut record, truth) = synthesize(&ecg, &subject_id(k))?;
        record.gender = Some(gender);
        record.age_years = Some(age);
        out.push((record, truth));
    }
    Ok(out)
}
