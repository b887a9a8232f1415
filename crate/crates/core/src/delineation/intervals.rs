use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::BeatFiducials;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntervalKind {
    PWave,
    PqSegment,
    Qrs,
    StSegment,
    TWave,
    TqBaseline,
    #[serde(rename = "P_R")]
    PR,
    #[serde(rename = "Q_T")]
    QT,
    #[serde(rename = "S_T")]
    ST,
}

/// The disjoint partition of a beat.
pub const BASE_INTERVALS: [IntervalKind; 6] = [
    IntervalKind::PWave,
    IntervalKind::PqSegment,
    IntervalKind::Qrs,
    IntervalKind::StSegment,
    IntervalKind::TWave,
    IntervalKind::TqBaseline,
];

pub const COMPOSITE_INTERVALS: [IntervalKind; 3] = [IntervalKind::PR, IntervalKind::QT, IntervalKind::ST];

impl IntervalKind {
    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::PWave => "P_WAVE",
            IntervalKind::PqSegment => "PQ_SEGMENT",
            IntervalKind::Qrs => "QRS",
            IntervalKind::StSegment => "ST_SEGMENT",
            IntervalKind::TWave => "T_WAVE",
            IntervalKind::TqBaseline => "TQ_BASELINE",
            IntervalKind::PR => "P_R",
            IntervalKind::QT => "Q_T",
            IntervalKind::ST => "S_T",
        }
    }

    pub fn is_base(self) -> bool {
        BASE_INTERVALS.contains(&self)
    }

    /// Base intervals a composite is the union of; a base interval is its
    /// own single constituent.
    pub fn constituents(self) -> &'static [IntervalKind] {
        use IntervalKind::*;
        match self {
            PR => &[PWave, PqSegment],
            QT => &[Qrs, StSegment, TWave],
            ST => &[StSegment, TWave],
            PWave => &[PWave],
            PqSegment => &[PqSegment],
            Qrs => &[Qrs],
            StSegment => &[StSegment],
            TWave => &[TWave],
            TqBaseline => &[TqBaseline],
        }
    }
}

impl fmt::Display for IntervalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Half-open sample range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleRange {
    pub start: usize,
    pub end: usize,
}

impl SampleRange {
    pub fn new(start: usize, end: usize) -> Self {
        SampleRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlap(&self, other: &SampleRange) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BeatIntervals {
    pub r: usize,
    pub ranges: BTreeMap<IntervalKind, SampleRange>,
}

impl BeatIntervals {
    pub fn get(&self, kind: IntervalKind) -> Option<SampleRange> {
        self.ranges.get(&kind).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalMap {
    pub beats: Vec<BeatIntervals>,
}

impl IntervalMap {
    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }
}

/// Partitions each delineated beat into the six base ranges and derives
/// the composites. Beats whose fiducials are out of order are skipped.
pub fn intervals(fids: &[BeatFiducials], _fs: f64) -> IntervalMap {
    use IntervalKind::*;
    let mut beats = Vec::with_capacity(fids.len());
    for (i, f) in fids.iter().enumerate() {
        if !f.is_ordered() {
            log::warn!("beat {i} at sample {} skipped: fiducials out of order", f.r);
            continue;
        }
        let mut ranges = BTreeMap::new();
        let (Some(q), Some(s)) = (f.q, f.s) else {
            log::warn!("beat {i} at sample {} skipped: QRS boundaries not found", f.r);
            continue;
        };
        ranges.insert(Qrs, SampleRange::new(q, s + 1));
        if let (Some(p_on), Some(p_off)) = (f.p_on, f.p_off) {
            ranges.insert(PWave, SampleRange::new(p_on, p_off));
            ranges.insert(PqSegment, SampleRange::new(p_off, q));
        }
        if let (Some(t_on), Some(t_off)) = (f.t_on, f.t_off) {
            ranges.insert(StSegment, SampleRange::new(s + 1, t_on));
            ranges.insert(TWave, SampleRange::new(t_on, t_off));
            let next_p = fids.get(i + 1).and_then(|n| n.p_on);
            if let Some(next_p) = next_p.filter(|&p| p > t_off) {
                ranges.insert(TqBaseline, SampleRange::new(t_off, next_p));
            }
        }
        for kind in COMPOSITE_INTERVALS {
            let parts: Option<Vec<SampleRange>> = kind.constituents().iter().map(|c| ranges.get(c).copied()).collect();
            if let Some(parts) = parts {
                let start = parts.iter().map(|r| r.start).min().unwrap();
                let end = parts.iter().map(|r| r.end).max().unwrap();
                ranges.insert(kind, SampleRange::new(start, end));
            }
        }
        beats.push(BeatIntervals { r: f.r, ranges });
    }
    IntervalMap { beats }
}
