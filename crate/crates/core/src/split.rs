//! Seeded train/test/validation partitioning of questions and projects.
//!
//! Questions derived from shall statements are split by ratio: the held-out
//! splits receive `floor(ratio * n)` questions each and Train takes the
//! remainder. Questions from internal guidance are auxiliary and always go
//! to Train. Projects are split whole: one Test project, one Val project,
//! the rest Train.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::question::{Origin, Question, Split};
use crate::seeded_rng;

const PROJECT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub val: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, test: 0.1, val: 0.1 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.test, self.val];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0 || *r > 1.0) {
            return Err(Error::Invalid(format!("split ratios out of range: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-9 {
            return Err(Error::Invalid(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub question_splits: BTreeMap<String, Split>,
    pub project_splits: BTreeMap<String, Split>,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn question_split(&self, id: &str) -> Option<Split> {
        self.question_splits.get(id).copied()
    }

    pub fn project_split(&self, id: &str) -> Option<Split> {
        self.project_splits.get(id).copied()
    }

    /// Ids assigned to `split`, sorted.
    pub fn questions_in(&self, split: Split) -> Vec<&str> {
        members(&self.question_splits, split)
    }

    pub fn projects_in(&self, split: Split) -> Vec<&str> {
        members(&self.project_splits, split)
    }

    /// Writes each question's split into the question itself.
    pub fn apply(&self, questions: &mut [Question]) {
        for q in questions {
            q.split = self.question_split(&q.id);
        }
    }
}

fn members(map: &BTreeMap<String, Split>, split: Split) -> Vec<&str> {
    map.iter().filter(|(_, s)| **s == split).map(|(k, _)| k.as_str()).collect()
}

/// Number of held-out items for `ratio` out of `n`.
pub fn holdout_count(ratio: f64, n: usize) -> usize {
    let count = libm::floor(ratio * n as f64 + 1e-9) as usize;
    if count == 0 && ratio > 0.0 && n >= 3 {
        1
    } else {
        count
    }
}

/// Partitions questions and projects. An empty `project_ids` means project
/// splitting was not requested.
pub fn split_corpus(
    questions: &[Question],
    project_ids: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    ratios.validate()?;

    let mut ids: Vec<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        let dup = ids.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]).unwrap_or_default();
        return Err(Error::DuplicateId(dup.into()));
    }

    let mut rng = seeded_rng(seed);
    let mut shall: Vec<&Question> = questions.iter().filter(|q| q.origin == Origin::ShallStatement).collect();
    shall.sort_by(|a, b| a.id.cmp(&b.id));
    shall.shuffle(&mut rng);

    let n_test = holdout_count(ratios.test, shall.len());
    let n_val = holdout_count(ratios.val, shall.len()).min(shall.len() - n_test);

    let mut question_splits = BTreeMap::new();
    for (i, q) in shall.iter().enumerate() {
        let split = if i < n_test {
            Split::Test
        } else if i < n_test + n_val {
            Split::Val
        } else {
            Split::Train
        };
        question_splits.insert(q.id.clone(), split);
    }
    for q in questions.iter().filter(|q| q.origin == Origin::InternalGuidance) {
        question_splits.insert(q.id.clone(), Split::Train);
    }

    let mut project_splits = BTreeMap::new();
    if !project_ids.is_empty() {
        let mut projects: Vec<&String> = project_ids.iter().collect();
        projects.sort();
        projects.dedup();
        if projects.len() < 3 {
            return Err(Error::Split(format!("project splitting needs at least 3 projects, got {}", projects.len())));
        }
        let mut rng = seeded_rng(seed ^ PROJECT_STREAM);
        projects.shuffle(&mut rng);
        for (i, p) in projects.into_iter().enumerate() {
            let split = match i {
                0 => Split::Test,
                1 => Split::Val,
                _ => Split::Train,
            };
            project_splits.insert(p.clone(), split);
        }
    }

    Ok(SplitAssignment { question_splits, project_splits, seed })
}
