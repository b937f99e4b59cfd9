//! Append-only decision journal.
//!
//! Each accepted decision is appended as one JSON line and fsynced before
//! [`ReviewStore::record`] returns. Compaction rewrites the file atomically,
//! optionally keeping only the latest decision per instance.

use std::fs;
use std::path::{Path, PathBuf};

use ragft_core::review::{latest_decisions, review_stats, ReviewDecision, ReviewStats};

use crate::error::{AppError, AppResult};
use crate::io::{self, JsonlAppender};

pub struct ReviewStore {
    path: PathBuf,
    history: Vec<ReviewDecision>,
    appender: JsonlAppender,
}

impl ReviewStore {
    /// Opens or creates the journal. A torn final line is discarded.
    pub fn open(path: &Path) -> AppResult<Self> {
        let mut history = Vec::new();
        let mut torn = false;
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            let lines: Vec<&str> = text.lines().collect();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ReviewDecision>(line) {
                    Ok(d) => history.push(d),
                    Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => torn = true,
                    Err(source) => return Err(AppError::Parse { path: path.to_path_buf(), line: i + 1, source }),
                }
            }
        }
        if torn {
            log::warn!("{}: discarding torn final line", path.display());
            io::write_jsonl(path, &history)?;
        }
        let appender = JsonlAppender::open(path)?;
        Ok(Self { path: path.to_path_buf(), history, appender })
    }

    pub fn history(&self) -> &[ReviewDecision] {
        &self.history
    }

    /// Validates and durably appends `decision`.
    pub fn record(&mut self, decision: ReviewDecision) -> AppResult<()> {
        decision.validate()?;
        self.appender.append(&decision)?;
        self.history.push(decision);
        Ok(())
    }

    pub fn stats(&self, sample: &[String]) -> ReviewStats {
        review_stats(sample, &self.history)
    }

    /// Rewrites the journal. Without `retain_history` only the latest
    /// decision per instance survives.
    pub fn compact(&mut self, retain_history: bool) -> AppResult<()> {
        if !retain_history {
            let latest: Vec<ReviewDecision> = latest_decisions(&self.history).into_values().cloned().collect();
            self.history = latest;
        }
        io::write_jsonl(&self.path, &self.history)?;
        self.appender = JsonlAppender::open(&self.path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ragft_core::review::Verdict;

    fn d(id: &str, status: Verdict, edit: Option<&str>) -> ReviewDecision {
        ReviewDecision {
            instance_id: id.into(),
            status,
            edited_answer: edit.map(Into::into),
            reviewer: "r1".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        {
            let mut s = ReviewStore::open(&path).unwrap();
            s.record(d("a", Verdict::Accepted, None)).unwrap();
            s.record(d("a", Verdict::MinorEdit, Some("x"))).unwrap();
            assert!(s.record(d("b", Verdict::MinorEdit, None)).is_err());
        }
        fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .and_then(|mut f| std::io::Write::write_all(&mut f, b"{\"instance_id\":\"b\",\"sta"))
            .unwrap();
        let mut s = ReviewStore::open(&path).unwrap();
        assert_eq!(s.history().len(), 2);
        s.record(d("b", Verdict::Rejected, None)).unwrap();
        assert_eq!(ReviewStore::open(&path).unwrap().history().len(), 3);

        s.compact(false).unwrap();
        let reopened = ReviewStore::open(&path).unwrap();
        assert_eq!(reopened.history().len(), 2);
        assert_eq!(reopened.history()[0].status, Verdict::MinorEdit);
    }
}
