use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_io::Task;
use crate::delineation::{IntervalKind, IntervalMap, SampleRange, BASE_INTERVALS, COMPOSITE_INTERVALS};
use crate::error::{Error, Result};

/// Named ECG features ranked in the top-three list.
pub const FEATURES: [(&str, IntervalKind); 4] = [
    ("R-Wave (QRS Complex)", IntervalKind::Qrs),
    ("S-T Interval", IntervalKind::ST),
    ("P-Q Interval (P-R)", IntervalKind::PR),
    ("Q-T Interval", IntervalKind::QT),
];

pub const TOP_K: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub interval: IntervalKind,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub task: Task,
    pub n_windows: usize,
    /// Every base and composite interval; base entries sum to 100.
    pub percentages: BTreeMap<IntervalKind, f64>,
    pub top3: Vec<RankedFeature>,
    pub head_weights: Vec<f64>,
}

impl AttributionReport {
    pub fn percent(&self, kind: IntervalKind) -> f64 {
        self.percentages.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn base_sum(&self) -> f64 {
        BASE_INTERVALS.iter().map(|&k| self.percent(k)).sum()
    }
}

/// Importance mass of each base interval, summed over beats. Patch `i`
/// spans `[i*P, (i+1)*P)` and contributes in proportion to its overlap.
pub fn interval_mass(importance: &[f64], intervals: &IntervalMap, patch_size: usize) -> BTreeMap<IntervalKind, f64> {
    let mut mass: BTreeMap<IntervalKind, f64> = BASE_INTERVALS.iter().map(|&k| (k, 0.0)).collect();
    for beat in &intervals.beats {
        for &kind in &BASE_INTERVALS {
            let Some(range) = beat.get(kind) else { continue };
            let first = range.start / patch_size;
            let last = range.end.div_ceil(patch_size).min(importance.len());
            for (i, imp) in importance.iter().enumerate().take(last).skip(first) {
                let patch = SampleRange::new(i * patch_size, (i + 1) * patch_size);
                *mass.get_mut(&kind).unwrap() += imp * patch.overlap(&range) as f64 / patch_size as f64;
            }
        }
    }
    mass
}

fn with_composites(mut pct: BTreeMap<IntervalKind, f64>) -> BTreeMap<IntervalKind, f64> {
    for kind in COMPOSITE_INTERVALS {
        let v = kind.constituents().iter().map(|c| pct[c]).sum();
        pct.insert(kind, v);
    }
    pct
}

/// Greedy top three among [`FEATURES`]: highest percentage first, and a
/// feature is skipped once any of its base intervals has been reported.
/// Candidates that strictly contain another candidate (Q-T holds both
/// QRS and S-T) are not ranked, so each base interval is reported once
/// and three disjoint features remain.
pub fn top_features(percentages: &BTreeMap<IntervalKind, f64>) -> Vec<RankedFeature> {
    let contains = |outer: IntervalKind, inner: IntervalKind| {
        outer != inner && inner.constituents().iter().all(|c| outer.constituents().contains(c))
    };
    let mut pool: Vec<(&str, IntervalKind)> = FEATURES
        .iter()
        .copied()
        .filter(|&(_, k)| !FEATURES.iter().any(|&(_, other)| contains(k, other)))
        .collect();
    let pct = |k: IntervalKind| percentages.get(&k).copied().unwrap_or(0.0);
    pool.sort_by(|a, b| pct(b.1).total_cmp(&pct(a.1)));
    let mut used: Vec<IntervalKind> = Vec::new();
    let mut out = Vec::new();
    for (name, kind) in pool {
        if out.len() == TOP_K {
            break;
        }
        if kind.constituents().iter().any(|c| used.contains(c)) {
            continue;
        }
        used.extend_from_slice(kind.constituents());
        out.push(RankedFeature {
            feature: name.to_string(),
            interval: kind,
            percent: pct(kind),
        });
    }
    out
}

/// Percentages for one window.
pub fn attribute(
    importance: &[f64],
    intervals: &IntervalMap,
    patch_size: usize,
    task: Task,
    head_weights: Vec<f64>,
) -> Result<AttributionReport> {
    if patch_size == 0 {
        return Err(Error::invalid("patch size must be positive"));
    }
    let mass = interval_mass(importance, intervals, patch_size);
    let total: f64 = mass.values().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Unattributable(format!(
            "{} delineated beats carry no importance mass",
            intervals.beats.len()
        )));
    }
    let pct = with_composites(mass.into_iter().map(|(k, m)| (k, 100.0 * m / total)).collect());
    Ok(AttributionReport {
        task,
        n_windows: 1,
        top3: top_features(&pct),
        percentages: pct,
        head_weights,
    })
}

/// Combines reports as a mean of their percentages weighted by how many
/// windows each already covers.
pub fn aggregate(reports: &[AttributionReport]) -> Result<AttributionReport> {
    let first = reports.first().ok_or_else(|| Error::Unattributable("no attributed windows".into()))?;
    if reports.iter().any(|r| r.task != first.task) {
        return Err(Error::invalid("cannot aggregate reports of different tasks"));
    }
    let n: usize = reports.iter().map(|r| r.n_windows).sum();
    let base: BTreeMap<IntervalKind, f64> = BASE_INTERVALS
        .iter()
        .map(|&k| {
            let s: f64 = reports.iter().map(|r| r.percent(k) * r.n_windows as f64).sum();
            (k, s / n as f64)
        })
        .collect();
    let pct = with_composites(base);
    Ok(AttributionReport {
        task: first.task,
        n_windows: n,
        top3: top_features(&pct),
        percentages: pct,
        head_weights: first.head_weights.clone(),
    })
}
