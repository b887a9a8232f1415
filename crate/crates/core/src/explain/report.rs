use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AttributionReport, PatchImportance};
use crate::delineation::{IntervalKind, IntervalMap, BASE_INTERVALS, COMPOSITE_INTERVALS};
use crate::error::{Error, Result};

pub const PER_HEAD_CSV: &str = "importance_per_head.csv";
pub const INTERVALS_CSV: &str = "interval_percentages.csv";
pub const ATTENTION_SVG: &str = "attention_map.svg";
pub const REPORT_JSON: &str = "attribution.json";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub per_head_csv: PathBuf,
    pub intervals_csv: PathBuf,
    pub svg: PathBuf,
    pub json: PathBuf,
}

/// Nine significant digits in scientific notation.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Pretty JSON with object keys in sorted order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn per_head_csv(imp: &PatchImportance, patch_size: usize) -> String {
    let mut s = String::from("head,patch,start_sample,end_sample,score\n");
    for (h, row) in imp.per_head.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let _ = writeln!(s, "{h},{i},{},{},{}", i * patch_size, (i + 1) * patch_size, sig9(*v));
        }
    }
    s
}

pub fn intervals_csv(report: &AttributionReport) -> String {
    let mut s = String::from("interval,kind,percent\n");
    for (kinds, label) in [(&BASE_INTERVALS[..], "base"), (&COMPOSITE_INTERVALS[..], "composite")] {
        for k in kinds {
            let _ = writeln!(s, "{},{label},{}", k.name(), sig9(report.percent(*k)));
        }
    }
    s
}

fn label_for(kind: IntervalKind) -> Option<&'static str> {
    match kind {
        IntervalKind::PWave => Some("P"),
        IntervalKind::Qrs => Some("QRS"),
        IntervalKind::TWave => Some("T"),
        _ => None,
    }
}

/// ECG trace with one shaded rectangle per patch (opacity proportional
/// to importance) and P/QRS/T labels at delineated beats.
pub fn attention_svg(window: &[f64], imp: &PatchImportance, patch_size: usize, intervals: &IntervalMap) -> String {
    const W: f64 = 1000.0;
    const H: f64 = 240.0;
    const PAD: f64 = 20.0;
    let n = window.len().max(2);
    let x_of = |i: f64| i / (n - 1) as f64 * W;
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let y_of = |v: f64| PAD + (1.0 - (v - lo) / span) * (H - 2.0 * PAD);
    let max_imp = imp.importance.iter().cloned().fold(0.0, f64::max);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r##"<g id="patches" fill="#d62728">"##);
    for (i, v) in imp.importance.iter().enumerate() {
        let opacity = if max_imp > 0.0 { v / max_imp } else { 0.0 };
        let x0 = x_of((i * patch_size) as f64);
        let x1 = x_of(((i + 1) * patch_size).min(n - 1) as f64);
        let _ = writeln!(
            s,
            r#"<rect class="patch" x="{x0:.3}" y="0" width="{:.3}" height="{H}" fill-opacity="{opacity:.4}"/>"#,
            (x1 - x0).max(0.0)
        );
    }
    let _ = writeln!(s, "</g>");
    let mut points = String::new();
    for (i, v) in window.iter().enumerate() {
        let _ = write!(points, "{:.3},{:.3} ", x_of(i as f64), y_of(*v));
    }
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
        points.trim_end()
    );
    let _ = writeln!(s, r#"<g id="labels" font-family="sans-serif" font-size="11" text-anchor="middle">"#);
    for beat in &intervals.beats {
        for (kind, range) in &beat.ranges {
            if let Some(label) = label_for(*kind) {
                let mid = (range.start + range.end) as f64 / 2.0;
                let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}">{label}</text>"#, x_of(mid), H - 4.0);
            }
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the four report files into `dir`.
pub fn emit_report(
    dir: &Path,
    report: &AttributionReport,
    imp: &PatchImportance,
    window: &[f64],
    intervals: &IntervalMap,
    patch_size: usize,
) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        per_head_csv: dir.join(PER_HEAD_CSV),
        intervals_csv: dir.join(INTERVALS_CSV),
        svg: dir.join(ATTENTION_SVG),
        json: dir.join(REPORT_JSON),
    };
    write(&files.per_head_csv, &per_head_csv(imp, patch_size))?;
    write(&files.intervals_csv, &intervals_csv(report))?;
    write(&files.svg, &attention_svg(window, imp, patch_size, intervals))?;
    write(&files.json, &to_sorted_json(report)?)?;
    Ok(files)
}
