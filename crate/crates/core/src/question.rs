//! Compliance questions and their validation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refextract::{extract_references, Reference};

/// Prefix every question is expected to start with.
pub const DEFAULT_QUESTION_PREFIX: &str = "Does the user documentation contain";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    ShallStatement,
    InternalGuidance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Val,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub references: Vec<Reference>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// One entry of the authored question file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub text: String,
    pub origin: Origin,
}

/// Turns authored records into questions, extracting references.
///
/// Errors name the offending record index. Prefix matching ignores ASCII case.
pub fn questions_from_records(records: Vec<QuestionRecord>, prefix: &str) -> Result<Vec<Question>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (i, record) in records.into_iter().enumerate() {
        if record.id.trim().is_empty() {
            return Err(Error::Invalid(format!("question record {i}: empty id")));
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        let starts = record.text.trim_start().get(..prefix.len()).is_some_and(|head| head.eq_ignore_ascii_case(prefix));
        if !starts {
            return Err(Error::Invalid(format!(
                "question record {i} (`{}`): text must begin with \"{prefix}\"",
                record.id
            )));
        }
        out.push(Question {
            references: extract_references(&record.text),
            id: record.id,
            text: record.text,
            origin: record.origin,
            split: None,
        });
    }
    Ok(out)
}

/// Reference coverage over a question set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub total_questions: usize,
    pub with_references: usize,
    pub fraction: f64,
}

pub fn reference_stats(questions: &[Question]) -> ReferenceStats {
    let total = questions.len();
    let with = questions.iter().filter(|q| !q.references.is_empty()).count();
    ReferenceStats {
        total_questions: total,
        with_references: with,
        fraction: if total == 0 { 0.0 } else { with as f64 / total as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn rec(id: &str, text: &str) -> QuestionRecord {
        QuestionRecord { id: id.to_string(), text: text.to_string(), origin: Origin::ShallStatement }
    }

    #[test]
    fn extracts_see_reference() {
        let qs = questions_from_records(
            vec![rec(
                "q1",
                "Does the user documentation contain A Software Component Design Verification \
                 Report that has been written in accordance with the generic requirements \
                 established for a Verification Report (see 6.2.4.13)",
            )],
            DEFAULT_QUESTION_PREFIX,
        )
        .unwrap();
        assert_eq!(qs[0].references.len(), 1);
        assert_eq!(qs[0].references[0].path, "6.2.4.13");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = questions_from_records(
            vec![
                rec("q1", "Does the user documentation contain a plan?"),
                rec("q1", "Does the user documentation contain a report?"),
            ],
            DEFAULT_QUESTION_PREFIX,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "q1"));
    }

    #[test]
    fn prefix_enforced_with_index() {
        let err = questions_from_records(
            vec![rec("q1", "Does the user documentation contain x?"), rec("q2", "Is there x?")],
            DEFAULT_QUESTION_PREFIX,
        )
        .unwrap_err();
        assert!(err.to_string().contains("record 1"));
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(questions_from_records(Vec::new(), DEFAULT_QUESTION_PREFIX).unwrap().is_empty());
        let stats = reference_stats(&[]);
        assert_eq!(stats.fraction, 0.0);
    }

    #[test]
    fn stats_count_reference_bearing_questions() {
        let qs = questions_from_records(
            vec![
                rec("a", "Does the user documentation contain a plan (see 5.3.2)?"),
                rec("b", "Does the user documentation contain a plan?"),
                rec("c", "Does the user documentation contain a plan per Annex A?"),
                rec("d", "does the user documentation contain a report?"),
            ],
            DEFAULT_QUESTION_PREFIX,
        )
        .unwrap();
        let stats = reference_stats(&qs);
        assert_eq!((stats.total_questions, stats.with_references), (4, 2));
        assert_eq!(stats.fraction, 0.5);
    }
}
