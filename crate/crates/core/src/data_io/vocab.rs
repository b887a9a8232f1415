use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{EcgRecord, Gender};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "gender")]
    Gender,
    #[serde(rename = "age")]
    AgeGroup,
    #[serde(rename = "id")]
    ParticipantId,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Gender => "gender",
            Task::AgeGroup => "age",
            Task::ParticipantId => "id",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Task::Gender),
            "age" => Ok(Task::AgeGroup),
            "id" => Ok(Task::ParticipantId),
            other => Err(Error::invalid(format!("unknown task `{other}` (expected gender|age|id)"))),
        }
    }
}

/// Age bins with inclusive upper edges.
pub const AGE_GROUPS: [&str; 5] = ["0-18", "19-35", "36-50", "51-65", "66+"];

pub fn age_group(age_years: u32) -> usize {
    match age_years {
        0..=18 => 0,
        19..=35 => 1,
        36..=50 => 2,
        51..=65 => 3,
        _ => 4,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub gender: Option<Gender>,
    pub age_years: Option<u32>,
}

impl From<&EcgRecord> for SubjectMeta {
    fn from(r: &EcgRecord) -> Self {
        SubjectMeta {
            subject_id: r.subject_id.clone(),
            gender: r.gender,
            age_years: r.age_years,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocab {
    pub task: Task,
    pub classes: Vec<String>,
}

impl LabelVocab {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Class index for a subject, or `None` when the metadata the task
    /// needs is missing (or the subject is outside an ID vocabulary).
    pub fn label(&self, meta: &SubjectMeta) -> Option<usize> {
        match self.task {
            Task::Gender => meta.gender.map(|g| match g {
                Gender::Male => 0,
                Gender::Female => 1,
            }),
            Task::AgeGroup => meta.age_years.map(age_group),
            Task::ParticipantId => self.classes.binary_search(&meta.subject_id).ok(),
        }
    }
}

/// Builds the class vocabulary for `task`. Subjects lacking the required
/// metadata are logged and left out.
pub fn build_vocab<'a, I>(subjects: I, task: Task) -> LabelVocab
where
    I: IntoIterator<Item = &'a SubjectMeta>,
{
    let classes = match task {
        Task::Gender => vec![Gender::Male.as_str().to_string(), Gender::Female.as_str().to_string()],
        Task::AgeGroup => AGE_GROUPS.iter().map(|s| s.to_string()).collect(),
        Task::ParticipantId => subjects
            .into_iter()
            .map(|m| m.subject_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    LabelVocab { task, classes }
}
