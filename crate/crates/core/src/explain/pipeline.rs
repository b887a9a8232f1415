use log::warn;

use super::{aggregate, attribute, extract_importance, head_weights, AttributionReport, PatchImportance};
use crate::data_io::Task;
use crate::delineation::{delineate, intervals, pan_tompkins, IntervalMap};
use crate::error::Result;
use crate::signal::EcgWindow;
use crate::vit::{forward, VitConfig, VitParams};

/// Delineates a window in its own sample coordinates.
pub fn window_intervals(window: &EcgWindow) -> Result<IntervalMap> {
    let peaks = pan_tompkins(&window.samples, window.fs)?;
    let fids = delineate(&window.samples, &peaks, window.fs);
    Ok(intervals(&fids, window.fs))
}

/// The first successfully attributed window, kept for plotting.
#[derive(Clone, Debug)]
pub struct Representative {
    pub index: usize,
    pub importance: PatchImportance,
    pub intervals: IntervalMap,
    pub report: AttributionReport,
}

#[derive(Clone, Debug)]
pub struct Explanation {
    pub report: AttributionReport,
    pub representative: Representative,
    /// Windows that could not be delineated or attributed.
    pub skipped: usize,
}

/// Attributes final-block class-token attention over every window and
/// aggregates the per-window percentages.
pub fn explain_windows(
    params: &VitParams,
    cfg: &VitConfig,
    windows: &[&EcgWindow],
    task: Task,
    batch_size: usize,
) -> Result<Explanation> {
    let weights = head_weights(params, cfg, None)?;
    let mut reports = Vec::new();
    let mut representative = None;
    let mut skipped = 0;
    let mut index = 0;
    for chunk in windows.chunks(batch_size.max(1)) {
        let xs: Vec<&[f64]> = chunk.iter().map(|w| w.samples.as_slice()).collect();
        let out = forward(params, cfg, &xs, None, true)?;
        for (b, w) in chunk.iter().enumerate() {
            let imp = extract_importance(&out, b, None)?;
            let result = window_intervals(w)
                .and_then(|iv| attribute(&imp.importance, &iv, cfg.patch_size, task, weights.clone()).map(|r| (iv, r)));
            match result {
                Ok((iv, report)) => {
                    if representative.is_none() {
                        representative = Some(Representative {
                            index,
                            importance: imp,
                            intervals: iv,
                            report: report.clone(),
                        });
                    }
                    reports.push(report);
                }
                Err(e) => {
                    warn!("window {index} ({} @ {}) skipped: {e}", w.subject_id, w.source_offset);
                    skipped += 1;
                }
            }
            index += 1;
        }
    }
    let report = aggregate(&reports)?;
    Ok(Explanation {
        report,
        representative: representative.expect("aggregate succeeded"),
        skipped,
    })
}
