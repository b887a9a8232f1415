use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::Task;
use crate::error::{Error, Result};
use crate::signal::EcgWindow;

pub const TRAIN_FRACTION: f64 = 0.70;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub window: EcgWindow,
    pub label: usize,
    pub task: Task,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Every participant lands in exactly one list.
    ByParticipant,
    /// Each participant's windows are spread over all three lists.
    WithinParticipant,
}

impl SplitMode {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::ParticipantId => SplitMode::WithinParticipant,
            Task::Gender | Task::AgeGroup => SplitMode::ByParticipant,
        }
    }
}

/// Indices into the window slice handed to [`make_split`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub mode: SplitMode,
}

/// Sizes for `n` items: about 70% train, the rest halved between
/// validation and test with a seeded coin for the odd one. From three
/// items up, validation and test each get at least one.
fn split_sizes(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let mut held = n - (TRAIN_FRACTION * n as f64).round() as usize;
    if n >= 3 {
        held = held.max(2);
    }
    let mut val = held / 2;
    if held % 2 == 1 && rng.gen_bool(0.5) {
        val += 1;
    }
    (n - held, val, held - val)
}

fn group_by_subject(windows: &[LabeledWindow]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        groups.entry(w.window.subject_id.as_str()).or_default().push(i);
    }
    for idx in groups.values_mut() {
        idx.sort_by_key(|&i| windows[i].window.source_offset);
    }
    groups
}

/// Splits windows 70/15/15. Inputs are put in (subject, offset) order
/// before any shuffling, so the plan does not depend on input order.
pub fn make_split(windows: &[LabeledWindow], task: Task, seed: u64) -> Result<SplitPlan> {
    if windows.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 windows to split, got {}", windows.len())));
    }
    if let Some(w) = windows.iter().find(|w| w.task != task) {
        return Err(Error::invalid(format!(
            "window of {} is labelled for task {} not {task}",
            w.window.subject_id, w.task
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = group_by_subject(windows);
    let mode = SplitMode::for_task(task);
    let mut plan = SplitPlan {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        mode,
    };
    match mode {
        SplitMode::WithinParticipant => {
            for (subject, idx) in &groups {
                if idx.len() < 3 {
                    warn!("excluding participant {subject}: {} windows, need 3", idx.len());
                    continue;
                }
                let mut idx = idx.clone();
                idx.shuffle(&mut rng);
                let (n_train, n_val, _) = split_sizes(idx.len(), &mut rng);
                plan.train.extend_from_slice(&idx[..n_train]);
                plan.val.extend_from_slice(&idx[n_train..n_train + n_val]);
                plan.test.extend_from_slice(&idx[n_train + n_val..]);
            }
        }
        SplitMode::ByParticipant => {
            // shuffle participants within each label, then interleave the
            // labels so held-out participants cover as many classes as possible
            let mut by_label: BTreeMap<usize, Vec<&Vec<usize>>> = BTreeMap::new();
            for (subject, idx) in &groups {
                let label = windows[idx[0]].label;
                if idx.iter().any(|&i| windows[i].label != label) {
                    return Err(Error::invalid(format!("participant {subject} has mixed labels")));
                }
                by_label.entry(label).or_default().push(idx);
            }
            for members in by_label.values_mut() {
                members.shuffle(&mut rng);
            }
            let longest = by_label.values().map(Vec::len).max().unwrap_or(0);
            let mut order = Vec::with_capacity(groups.len());
            for k in 0..longest {
                for members in by_label.values() {
                    if let Some(m) = members.get(k) {
                        order.push(*m);
                    }
                }
            }
            let (_, n_val, n_test) = split_sizes(order.len(), &mut rng);
            for (pos, idx) in order.iter().enumerate() {
                let dest = if pos < n_val {
                    &mut plan.val
                } else if pos < n_val + n_test {
                    &mut plan.test
                } else {
                    &mut plan.train
                };
                dest.extend_from_slice(idx);
            }
        }
    }
    for list in [&mut plan.train, &mut plan.val, &mut plan.test] {
        list.sort_by(|&a, &b| {
            let (wa, wb) = (&windows[a].window, &windows[b].window);
            (&wa.subject_id, wa.source_offset).cmp(&(&wb.subject_id, wb.source_offset))
        });
    }
    Ok(plan)
}
