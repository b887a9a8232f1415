use serde::{Deserialize, Serialize};

use super::{ms, RPeakList};

/// Landmarks of one beat. `*_peak` are the wave centres the on/off points
/// are laid around.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BeatFiducials {
    pub p_on: Option<usize>,
    pub p_peak: Option<usize>,
    pub p_off: Option<usize>,
    pub q: Option<usize>,
    pub r: usize,
    pub s: Option<usize>,
    pub t_on: Option<usize>,
    pub t_peak: Option<usize>,
    pub t_off: Option<usize>,
}

impl BeatFiducials {
    pub fn has_p(&self) -> bool {
        self.p_on.is_some() && self.p_off.is_some()
    }

    pub fn has_t(&self) -> bool {
        self.t_on.is_some() && self.t_off.is_some()
    }

    /// Present landmarks in physiological order.
    pub fn ordered(&self) -> Vec<usize> {
        [
            self.p_on,
            self.p_off,
            self.q,
            Some(self.r),
            self.s,
            self.t_on,
            self.t_off,
        ]
        .into_iter()
        .flatten()
        .collect()
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered().windows(2).all(|w| w[0] < w[1])
    }
}

/// Regions whose peak-to-peak excursion is below this fraction of the
/// window's range count as flat.
const FLAT_FRACTION: f64 = 0.02;

fn argmax_by<F: Fn(usize) -> f64>(lo: usize, hi: usize, key: F) -> Option<usize> {
    (lo..hi).max_by(|&a, &b| key(a).total_cmp(&key(b)).then(b.cmp(&a)))
}

fn range_of(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Finds the most prominent point of `x[lo..hi]` under `score`; `None` when
/// the region is empty, flat, or the extremum sits on the region boundary.
fn wave_center<F: Fn(usize) -> f64>(x: &[f64], lo: usize, hi: usize, flat: f64, score: F) -> Option<usize> {
    if hi <= lo + 2 {
        return None;
    }
    if range_of(&x[lo..hi]) < flat {
        return None;
    }
    let c = argmax_by(lo, hi, score)?;
    (c > lo && c + 1 < hi).then_some(c)
}

/// Rule-based delineation around each R peak:
/// Q/S are minima within 80 ms before/after R, the P wave is a +-40 ms
/// region around the maximum in (R-240 ms, R-90 ms), and the T wave a
/// +-80 ms region around the extremum in (S+80 ms, S+360 ms). Each R is
/// first re-centred on the signal maximum within +-20 ms.
pub fn delineate(x: &[f64], peaks: &RPeakList, fs: f64) -> Vec<BeatFiducials> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let flat = FLAT_FRACTION * range_of(x);
    let snap = ms(fs, 20.0);
    let qs_reach = ms(fs, 80.0);
    let (p_far, p_near, p_half) = (ms(fs, 240.0), ms(fs, 90.0), ms(fs, 40.0));
    let (t_near, t_far, t_half) = (ms(fs, 80.0), ms(fs, 360.0), ms(fs, 80.0));

    let mut out = Vec::with_capacity(peaks.len());
    for &r0 in &peaks.indices {
        if r0 >= n {
            continue;
        }
        let r = argmax_by(r0.saturating_sub(snap), (r0 + snap + 1).min(n), |i| x[i]).unwrap_or(r0);

        let q_lo = (r + 1).saturating_sub(qs_reach);
        let q = (q_lo < r)
            .then(|| argmax_by(q_lo, r, |i| -x[i]))
            .flatten();
        let s_hi = (r + qs_reach).min(n);
        let s = (r + 1 < s_hi)
            .then(|| argmax_by(r + 1, s_hi, |i| -x[i]))
            .flatten();

        let mut beat = BeatFiducials {
            q,
            r,
            s,
            ..Default::default()
        };

        let qrs_start = q.unwrap_or(r);
        if r > p_near {
            let hi = r - p_near;
            let lo = (r + 1).saturating_sub(p_far);
            if let Some(pc) = wave_center(x, lo, hi, flat, |i| x[i]) {
                let p_on = pc.saturating_sub(p_half);
                let p_off = (pc + p_half).min(qrs_start.saturating_sub(1));
                if p_on < p_off && p_off < qrs_start {
                    beat.p_on = Some(p_on);
                    beat.p_peak = Some(pc);
                    beat.p_off = Some(p_off);
                }
            }
        }

        let qrs_end = s.unwrap_or(r);
        let lo = (qrs_end + t_near + 1).min(n);
        let hi = (qrs_end + t_far).min(n);
        if lo < hi {
            let mut region = x[lo..hi].to_vec();
            region.sort_by(|a, b| a.total_cmp(b));
            let baseline = region[region.len() / 2];
            if let Some(tc) = wave_center(x, lo, hi, flat, |i| (x[i] - baseline).abs()) {
                let t_on = tc.saturating_sub(t_half).max(qrs_end + 1);
                let t_off = (tc + t_half).min(n - 1);
                if t_on < t_off {
                    beat.t_on = Some(t_on);
                    beat.t_peak = Some(tc);
                    beat.t_off = Some(t_off);
                }
            }
        }
        out.push(beat);
    }
    out
}
