mod attribution;
mod importance;
mod pipeline;
mod report;

pub use attribution::{aggregate, attribute, interval_mass, top_features, AttributionReport, RankedFeature, FEATURES, TOP_K};
pub use importance::{extract_importance, head_weights, PatchImportance};
pub use pipeline::{explain_windows, window_intervals, Explanation, Representative};
pub use report::{
    attention_svg, emit_report, intervals_csv, per_head_csv, sig9, to_sorted_json, ReportFiles, ATTENTION_SVG,
    INTERVALS_CSV, PER_HEAD_CSV, REPORT_JSON,
};
