//! Dataset ingestion, label vocabularies and a synthetic ECG generator
//! with exact ground-truth fiducials.

mod cohort;
mod manifest;
mod synth;
mod vocab;

pub use cohort::{subject_id, synthesize_cohort, CohortSpec};
pub use manifest::{
    load_manifest, load_record, read_samples_csv, write_dataset, write_samples_csv, DatasetManifest, ManifestEntry,
};
pub use synth::{synthesize, BeatTruth, SyntheticEcgSpec, SyntheticTruth, WaveShape};
pub use vocab::{age_group, build_vocab, LabelVocab, SubjectMeta, Task, AGE_GROUPS};
