//! Butterworth bandpass design as second-order sections and zero-phase
//! forward-backward application.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub fs: f64,
}

impl FilterSpec {
    pub fn new(low_hz: f64, high_hz: f64, order: usize, fs: f64) -> Result<Self> {
        let spec = FilterSpec {
            low_hz,
            high_hz,
            order,
            fs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::invalid("filter order must be positive"));
        }
        let nyquist = self.fs / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < nyquist) {
            return Err(Error::invalid(format!(
                "bandpass edges must satisfy 0 < low < high < fs/2, got low={} high={} fs={}",
                self.low_hz, self.high_hz, self.fs
            )));
        }
        Ok(())
    }
}

/// One normalized biquad: `b` numerator, `a = [1, a1, a2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z_inv2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z_inv2 * self.a[2];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct-form II state reached after a unit step settles.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[2] * g]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub fs: f64,
}

impl BiquadCascade {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.fs;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Per-section initial states for a unit-step steady state, in the
    /// spirit of `sosfilt_zi`.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state();
                let out = [st[0] * scale, st[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }
}

/// Designs an order-`order` Butterworth bandpass (2·order poles) through the
/// analog prototype, a lowpass-to-bandpass transform and the bilinear
/// transform with frequency pre-warping.
pub fn design_butterworth_bandpass(spec: &FilterSpec) -> Result<BiquadCascade> {
    spec.validate()?;
    let n = spec.order;
    let fs2 = 2.0 * spec.fs;
    let warp = |f: f64| fs2 * (PI * f / spec.fs).tan();
    let (wl, wh) = (warp(spec.low_hz), warp(spec.high_hz));
    let bw = wh - wl;
    let w0_sq = wl * wh;

    let mut analog_poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        analog_poles.push(half + disc);
        analog_poles.push(half - disc);
    }

    // n analog zeros at the origin; the remaining n sit at infinity.
    let mut gain = Complex64::new(bw.powi(n as i32), 0.0);
    gain *= Complex64::new(fs2, 0.0).powi(n as i32);
    let digital_poles: Vec<Complex64> = analog_poles
        .iter()
        .map(|&p| {
            gain /= fs2 - p;
            (fs2 + p) / (fs2 - p)
        })
        .collect();
    let gain = gain.re;

    let pairs = pair_poles(digital_poles)?;
    let section_gain = gain.abs().powf(1.0 / n as f64);
    let sections = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (p1, p2))| {
            let g = if i == 0 { section_gain * gain.signum() } else { section_gain };
            Biquad {
                // one zero at z = 1 and one at z = -1
                b: [g, 0.0, -g],
                a: [1.0, -(p1 + p2).re, (p1 * p2).re],
            }
        })
        .collect();
    Ok(BiquadCascade {
        sections,
        fs: spec.fs,
    })
}

fn pair_poles(poles: Vec<Complex64>) -> Result<Vec<(Complex64, Complex64)>> {
    const IMAG_TOL: f64 = 1e-12;
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for p in &poles {
        if p.im > IMAG_TOL {
            pairs.push((*p, p.conj()));
        } else if p.im.abs() <= IMAG_TOL {
            reals.push(p.re);
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    if reals.len() % 2 != 0 {
        return Err(Error::invalid("unpaired real pole in bandpass design"));
    }
    for chunk in reals.chunks(2) {
        pairs.push((Complex64::new(chunk[0], 0.0), Complex64::new(chunk[1], 0.0)));
    }
    // sort by pole radius so the sharpest sections run last
    pairs.sort_by(|a, b| a.0.norm().total_cmp(&b.0.norm()));
    if pairs.len() * 2 != poles.len() {
        return Err(Error::invalid("pole pairing lost poles"));
    }
    Ok(pairs)
}

/// Causal cascade filtering in transposed direct-form II. `init` scales the
/// unit-step steady state used as the initial condition (0 means rest).
pub fn sosfilt(cascade: &BiquadCascade, x: &[f64], init: f64) -> Vec<f64> {
    let mut states: Vec<[f64; 2]> = cascade
        .step_states()
        .into_iter()
        .map(|s| [s[0] * init, s[1] * init])
        .collect();
    let mut y = x.to_vec();
    for (sec, z) in cascade.sections.iter().zip(states.iter_mut()) {
        for v in y.iter_mut() {
            let input = *v;
            let out = sec.b[0] * input + z[0];
            z[0] = sec.b[1] * input - sec.a[1] * out + z[1];
            z[1] = sec.b[2] * input - sec.a[2] * out;
            *v = out;
        }
    }
    y
}

/// Zero-phase forward-backward filtering with odd-extension padding and
/// steady-state initial conditions.
pub fn filtfilt(cascade: &BiquadCascade, x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("filtfilt on empty input"));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("filtfilt input sample {i}")));
    }
    let n = x.len();
    let pad = (3 * (2 * cascade.sections.len() + 1)).min(n - 1);

    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let fwd = sosfilt(cascade, &ext, ext[0]);
    let mut rev: Vec<f64> = fwd.into_iter().rev().collect();
    let first = rev[0];
    rev = sosfilt(cascade, &rev, first);
    rev.reverse();
    Ok(rev[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecg_band() -> BiquadCascade {
        design_butterworth_bandpass(&FilterSpec::new(0.5, 40.0, 4, 250.0).unwrap()).unwrap()
    }

    #[test]
    fn rejects_inverted_band() {
        assert!(FilterSpec::new(40.0, 0.5, 4, 250.0).is_err());
        assert!(FilterSpec::new(0.5, 130.0, 4, 250.0).is_err());
        assert!(FilterSpec::new(0.0, 40.0, 4, 250.0).is_err());
        assert!(FilterSpec::new(0.5, 40.0, 0, 250.0).is_err());
    }

    #[test]
    fn dc_is_rejected() {
        assert!(ecg_band().gain(0.0) < 1e-6);
    }

    #[test]
    fn unity_at_geometric_center() {
        let g = ecg_band().gain((0.5f64 * 40.0).sqrt());
        assert!((0.89..=1.12).contains(&g), "gain {g}");
    }

    #[test]
    fn cutoffs_are_half_power() {
        let c = ecg_band();
        for f in [0.5, 40.0] {
            let g = c.gain(f);
            assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "f={f} g={g}");
        }
    }

    #[test]
    fn section_count_matches_order() {
        for order in 1..=6 {
            let c = design_butterworth_bandpass(&FilterSpec::new(5.0, 15.0, order, 250.0).unwrap()).unwrap();
            assert_eq!(c.sections.len(), order);
            assert!(c.gain(0.0) < 1e-9);
            assert!((c.gain((75.0f64).sqrt()) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_signal_maps_to_zero() {
        let y = filtfilt(&ecg_band(), &vec![3.7; 1000]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let mut x = vec![0.0; 10];
        x[4] = f64::NAN;
        assert!(matches!(filtfilt(&ecg_band(), &x), Err(Error::NonFinite(_))));
        assert!(filtfilt(&ecg_band(), &[]).is_err());
    }

    #[test]
    fn single_sample_input() {
        let y = filtfilt(&ecg_band(), &[1.0]).unwrap();
        assert_eq!(y.len(), 1);
    }
}
