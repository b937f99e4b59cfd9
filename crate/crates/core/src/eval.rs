//! Blind A/B evaluation on a 0-10 correctness scale.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SeededRng;

pub const MAX_SCORE: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
}

impl Label {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "A" | "a" => Some(Self::A),
            "B" | "b" => Some(Self::B),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// The baseline (first response set).
    Model1,
    /// The candidate (second response set).
    Model2,
}

/// What raters see. Carries no model identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindItem {
    pub item_id: String,
    pub question_id: String,
    pub answer_a: String,
    pub answer_b: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub a: Model,
    pub b: Model,
}

impl Assignment {
    pub fn model_of(&self, label: Label) -> Model {
        match label {
            Label::A => self.a,
            Label::B => self.b,
        }
    }
}

/// Unblinding key, kept apart from the items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindKey {
    pub seed: u64,
    pub model1_name: String,
    pub model2_name: String,
    pub assignments: BTreeMap<String, Assignment>,
}

/// Pairs the two response sets item by item, flipping a seeded coin per
/// item to decide which answer appears as A.
pub fn build_blind_set(
    responses_1: &BTreeMap<String, String>,
    responses_2: &BTreeMap<String, String>,
    model1_name: &str,
    model2_name: &str,
    seed: u64,
) -> Result<(Vec<BlindItem>, BlindKey)> {
    let ids_1: BTreeSet<&String> = responses_1.keys().collect();
    let ids_2: BTreeSet<&String> = responses_2.keys().collect();
    if ids_1 != ids_2 {
        let missing_2: Vec<&str> = ids_1.difference(&ids_2).map(|s| s.as_str()).collect();
        let missing_1: Vec<&str> = ids_2.difference(&ids_1).map(|s| s.as_str()).collect();
        let mut parts = Vec::new();
        if !missing_2.is_empty() {
            parts.push(format!("missing from responses_2: {}", missing_2.join(", ")));
        }
        if !missing_1.is_empty() {
            parts.push(format!("missing from responses_1: {}", missing_1.join(", ")));
        }
        return Err(Error::Invalid(parts.join("; ")));
    }
    let mut rng: SeededRng = crate::seeded_rng(seed);
    let mut items = Vec::with_capacity(responses_1.len());
    let mut assignments = BTreeMap::new();
    for (i, (question_id, answer_1)) in responses_1.iter().enumerate() {
        let answer_2 = &responses_2[question_id];
        let item_id = format!("item-{:04}", i + 1);
        let (assignment, a, b) = if rng.gen_bool(0.5) {
            (Assignment { a: Model::Model2, b: Model::Model1 }, answer_2, answer_1)
        } else {
            (Assignment { a: Model::Model1, b: Model::Model2 }, answer_1, answer_2)
        };
        assignments.insert(item_id.clone(), assignment);
        items.push(BlindItem { item_id, question_id: question_id.clone(), answer_a: a.clone(), answer_b: b.clone() });
    }
    let key = BlindKey { seed, model1_name: model1_name.into(), model2_name: model2_name.into(), assignments };
    Ok((items, key))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub item_id: String,
    pub label: Label,
    pub score: u8,
    pub rater: String,
}

impl Rating {
    pub fn validate(&self) -> Result<()> {
        if self.score > MAX_SCORE {
            return Err(Error::Invalid(format!("score {} for `{}` outside 0..=10", self.score, self.item_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub ratings: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub base: ModelSummary,
    pub candidate: ModelSummary,
    /// (candidate - base) / base.
    pub relative_improvement: f64,
    /// candidate - base, in score points.
    pub absolute_points: f64,
    /// Absolute difference as a percentage of the 10-point scale.
    pub absolute_scale_percent: f64,
    pub relative_display: String,
    pub partial: bool,
    pub items_total: usize,
    pub items_complete: usize,
    pub missing: Vec<String>,
}

/// Unblinds the ratings and computes per-model means.
///
/// Items lacking a rating for either position mark the report partial;
/// their ratings still count toward the means.
pub fn summarize(ratings: &[Rating], key: &BlindKey) -> Result<EvalReport> {
    let mut sums = [0u64; 2];
    let mut counts = [0usize; 2];
    let mut seen: BTreeMap<&str, BTreeSet<Label>> = BTreeMap::new();
    for r in ratings {
        r.validate()?;
        let assignment = key
            .assignments
            .get(&r.item_id)
            .ok_or_else(|| Error::UnknownId(format!("rated item `{}` not in key", r.item_id)))?;
        let slot = match assignment.model_of(r.label) {
            Model::Model1 => 0,
            Model::Model2 => 1,
        };
        sums[slot] += u64::from(r.score);
        counts[slot] += 1;
        seen.entry(r.item_id.as_str()).or_default().insert(r.label);
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::Invalid("ratings cover only one model".into()));
    }
    let missing: Vec<String> =
        key.assignments.keys().filter(|id| seen.get(id.as_str()).map_or(0, BTreeSet::len) < 2).cloned().collect();
    let base = sums[0] as f64 / counts[0] as f64;
    let cand = sums[1] as f64 / counts[1] as f64;
    let relative = if base == 0.0 { 0.0 } else { (cand - base) / base };
    let absolute = cand - base;
    Ok(EvalReport {
        base: ModelSummary { name: key.model1_name.clone(), ratings: counts[0], mean: base },
        candidate: ModelSummary { name: key.model2_name.clone(), ratings: counts[1], mean: cand },
        relative_improvement: relative,
        absolute_points: absolute,
        absolute_scale_percent: absolute / f64::from(MAX_SCORE) * 100.0,
        relative_display: format!("{:.0}%", libm::round(relative * 100.0)),
        partial: !missing.is_empty(),
        items_total: key.assignments.len(),
        items_complete: key.assignments.len() - missing.len(),
        missing,
    })
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>8} {:>8}\n{:<16} {:>8} {:>8.2}\n{:<16} {:>8} {:>8.2}\n",
            "model",
            "ratings",
            "mean",
            self.base.name,
            self.base.ratings,
            self.base.mean,
            self.candidate.name,
            self.candidate.ratings,
            self.candidate.mean,
        );
        s.push_str(&format!(
            "relative improvement: {} ({:.2}%)\nabsolute improvement: {:+.2} points ({:+.1}% of scale)\n",
            self.relative_display,
            self.relative_improvement * 100.0,
            self.absolute_points,
            self.absolute_scale_percent,
        ));
        if self.partial {
            s.push_str(&format!(
                "PARTIAL: {} of {} items rated for both positions; missing {}\n",
                self.items_complete,
                self.items_total,
                self.missing.join(", ")
            ));
        }
        s
    }
}
