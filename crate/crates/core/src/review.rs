//! Human review decisions over sampled training instances.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    MinorEdit,
    MajorEdit,
    Rejected,
}

impl Verdict {
    pub fn is_edit(self) -> bool {
        matches!(self, Self::MinorEdit | Self::MajorEdit)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    #[default]
    Unreviewed,
    Accepted,
    MinorEdit,
    MajorEdit,
    Rejected,
}

impl From<Verdict> for ReviewStatus {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Accepted => Self::Accepted,
            Verdict::MinorEdit => Self::MinorEdit,
            Verdict::MajorEdit => Self::MajorEdit,
            Verdict::Rejected => Self::Rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub instance_id: String,
    pub status: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_answer: Option<String>,
    pub reviewer: String,
    /// RFC 3339.
    pub timestamp: String,
}

impl ReviewDecision {
    /// Edits must carry a non-empty answer; other verdicts must not.
    pub fn validate(&self) -> Result<()> {
        let has_edit = self.edited_answer.as_deref().is_some_and(|a| !a.trim().is_empty());
        if self.status.is_edit() && !has_edit {
            return Err(Error::Invalid(alloc::format!(
                "{:?} decision for `{}` needs a non-empty edited_answer",
                self.status,
                self.instance_id
            )));
        }
        if !self.status.is_edit() && self.edited_answer.is_some() {
            return Err(Error::Invalid(alloc::format!(
                "{:?} decision for `{}` must not carry an edited_answer",
                self.status,
                self.instance_id
            )));
        }
        if self.reviewer.trim().is_empty() {
            return Err(Error::Invalid("reviewer id is empty".into()));
        }
        Ok(())
    }
}

/// Latest decision per instance; later entries in `history` win.
pub fn latest_decisions(history: &[ReviewDecision]) -> BTreeMap<&str, &ReviewDecision> {
    let mut latest = BTreeMap::new();
    for d in history {
        latest.insert(d.instance_id.as_str(), d);
    }
    latest
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReviewStats {
    pub sample_size: usize,
    pub reviewed: usize,
    pub accepted: usize,
    pub minor_edit: usize,
    pub major_edit: usize,
    pub rejected: usize,
    /// Minor plus major edits over reviewed items.
    pub modified_fraction: f64,
    /// Major edits over reviewed items.
    pub major_fraction: f64,
}

/// Tallies the latest decision of every sampled instance.
pub fn review_stats(sample: &[String], history: &[ReviewDecision]) -> ReviewStats {
    let latest = latest_decisions(history);
    let mut stats = ReviewStats { sample_size: sample.len(), ..Default::default() };
    for id in sample {
        let Some(d) = latest.get(id.as_str()) else { continue };
        stats.reviewed += 1;
        match d.status {
            Verdict::Accepted => stats.accepted += 1,
            Verdict::MinorEdit => stats.minor_edit += 1,
            Verdict::MajorEdit => stats.major_edit += 1,
            Verdict::Rejected => stats.rejected += 1,
        }
    }
    if stats.reviewed > 0 {
        let reviewed = stats.reviewed as f64;
        stats.modified_fraction = (stats.minor_edit + stats.major_edit) as f64 / reviewed;
        stats.major_fraction = stats.major_edit as f64 / reviewed;
    }
    stats
}

/// History entries for one instance, oldest first.
pub fn history_of<'a>(history: &'a [ReviewDecision], instance_id: &str) -> Vec<&'a ReviewDecision> {
    history.iter().filter(|d| d.instance_id == instance_id).collect()
}
