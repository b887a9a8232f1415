//! R-peak detection and rule-based PQRST delineation.

mod fiducials;
mod intervals;
mod pan_tompkins;

pub use fiducials::{delineate, BeatFiducials};
pub use intervals::{intervals, BeatIntervals, IntervalKind, IntervalMap, SampleRange, BASE_INTERVALS, COMPOSITE_INTERVALS};
pub use pan_tompkins::{pan_tompkins, RPeakList, REFRACTORY_S};

pub(crate) fn ms(fs: f64, millis: f64) -> usize {
    (millis * 1e-3 * fs).round() as usize
}
