//! Sliding-window chunking of documentation and standards text.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::whitespace_spans;

/// Project identifier carried by every standards (context) chunk.
pub const STANDARDS_PROJECT_ID: &str = "__standards__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Document,
    Context,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub corpus_kind: CorpusKind,
    pub project_id: String,
    pub source_doc: String,
    pub seq: u32,
    pub text: String,
    pub approx_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub chunk_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self { chunk_tokens: 350, overlap_tokens: 50 }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_tokens == 0 || self.overlap_tokens >= self.chunk_tokens {
            return Err(Error::Config(format!(
                "chunk size {} must be positive and exceed overlap {}",
                self.chunk_tokens, self.overlap_tokens
            )));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.chunk_tokens - self.overlap_tokens
    }
}

/// Token offsets `(start, end)` of every window over `n_tokens` tokens.
///
/// Windows advance by `chunk - overlap`; the last window is the first one
/// that reaches the end of the input.
pub fn window_schedule(n_tokens: usize, config: &ChunkingConfig) -> Vec<(usize, usize)> {
    let mut windows = Vec::new();
    if n_tokens == 0 {
        return windows;
    }
    let mut start = 0;
    loop {
        let end = (start + config.chunk_tokens).min(n_tokens);
        windows.push((start, end));
        if end == n_tokens {
            break;
        }
        start += config.stride();
    }
    windows
}

/// Stable chunk id: first 16 hex chars of SHA-256 over (source_doc, seq, text).
pub fn chunk_id(source_doc: &str, seq: u32, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(source_doc.as_bytes());
    hasher.update([0x1f]);
    hasher.update(seq.to_be_bytes());
    hasher.update([0x1f]);
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}

/// Splits one source text into chunks in document order.
///
/// Chunk text is the verbatim source slice from the first to the last token
/// of its window, so line structure (headings) survives chunking. Returns an
/// empty list for blank input.
pub fn chunk_source(
    text: &str,
    source_doc: &str,
    project_id: &str,
    kind: CorpusKind,
    config: &ChunkingConfig,
) -> Result<Vec<Chunk>> {
    config.validate()?;
    let project_id = match kind {
        CorpusKind::Context => STANDARDS_PROJECT_ID,
        CorpusKind::Document => {
            if project_id.is_empty() || project_id == STANDARDS_PROJECT_ID {
                return Err(Error::Invalid(format!(
                    "document `{source_doc}` needs a project id other than the standards id"
                )));
            }
            project_id
        }
    };
    let spans = whitespace_spans(text);
    let chunks = window_schedule(spans.len(), config)
        .into_iter()
        .enumerate()
        .map(|(seq, (start, end))| {
            let seq = seq as u32;
            let slice = &text[spans[start].0..spans[end - 1].1];
            Chunk {
                id: chunk_id(source_doc, seq, slice),
                corpus_kind: kind,
                project_id: project_id.to_string(),
                source_doc: source_doc.to_string(),
                seq,
                text: slice.to_string(),
                approx_tokens: (end - start) as u32,
            }
        })
        .collect();
    Ok(chunks)
}

/// Rebuilds a source's token stream from its chunks by dropping each
/// chunk's leading overlap.
pub fn reconstruct(chunks: &[Chunk], config: &ChunkingConfig) -> String {
    let mut words: Vec<&str> = Vec::new();
    for (i, chunk) in chunks.iter().enumerate() {
        let skip = if i == 0 { 0 } else { config.overlap_tokens };
        words.extend(chunk.text.split_whitespace().skip(skip));
    }
    words.join(" ")
}

/// Fails on the first id shared by two chunks.
pub fn ensure_unique_ids<'a>(chunks: impl IntoIterator<Item = &'a Chunk>) -> Result<()> {
    let mut seen = alloc::collections::BTreeSet::new();
    for chunk in chunks {
        if !seen.insert(chunk.id.as_str()) {
            return Err(Error::DuplicateId(chunk.id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::normalize_ws;
    use proptest::prelude::*;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn small_input_is_one_chunk() {
        let text = words(10);
        let chunks = chunk_source(&text, "p/a.md", "p", CorpusKind::Document, &ChunkingConfig::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, text);
        assert_eq!(chunks[0].approx_tokens, 10);
    }

    #[test]
    fn seven_hundred_tokens_give_three_windows() {
        // stride 300: [0,350) [300,650) [600,700)
        let cfg = ChunkingConfig::default();
        assert_eq!(window_schedule(700, &cfg), [(0, 350), (300, 650), (600, 700)]);
        let chunks = chunk_source(&words(700), "p/a", "p", CorpusKind::Document, &cfg).unwrap();
        let firsts: Vec<&str> = chunks.iter().map(|c| c.text.split_whitespace().next().unwrap()).collect();
        assert_eq!(firsts, ["w0", "w300", "w600"]);
    }

    #[test]
    fn context_chunks_get_reserved_project() {
        let chunks =
            chunk_source("1.1 Scope\nText", "std.md", "ignored", CorpusKind::Context, &ChunkingConfig::default())
                .unwrap();
        assert!(chunks.iter().all(|c| c.corpus_kind == CorpusKind::Context && c.project_id == STANDARDS_PROJECT_ID));
    }

    #[test]
    fn blank_input_yields_nothing() {
        let chunks = chunk_source(" \n\t", "p/a", "p", CorpusKind::Document, &ChunkingConfig::default()).unwrap();
        assert!(chunks.is_empty());
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = ChunkingConfig { chunk_tokens: 10, overlap_tokens: 10 };
        assert!(chunk_source("a b", "s", "p", CorpusKind::Document, &cfg).is_err());
    }

    #[test]
    fn chunk_preserves_line_breaks() {
        let cfg = ChunkingConfig { chunk_tokens: 4, overlap_tokens: 1 };
        let chunks = chunk_source("6.2 Heading\nbody text\nmore", "s", "", CorpusKind::Context, &cfg).unwrap();
        assert_eq!(chunks[0].text, "6.2 Heading\nbody text");
    }

    #[test]
    fn ids_are_stable_and_distinct() {
        let cfg = ChunkingConfig { chunk_tokens: 3, overlap_tokens: 1 };
        let a = chunk_source(&words(20), "p/a", "p", CorpusKind::Document, &cfg).unwrap();
        let b = chunk_source(&words(20), "p/a", "p", CorpusKind::Document, &cfg).unwrap();
        assert_eq!(a, b);
        ensure_unique_ids(&a).unwrap();
        assert!(a.iter().all(|c| c.id.len() == 16));
    }

    proptest! {
        #[test]
        fn reconstruction_reproduces_source(
            text in "[a-z ]{0,40}( [a-z\n\t]{1,8}){0,120}",
            size in 2usize..40,
            overlap_frac in 0usize..100,
        ) {
            let overlap = overlap_frac * (size - 1) / 100;
            let cfg = ChunkingConfig { chunk_tokens: size, overlap_tokens: overlap };
            let chunks = chunk_source(&text, "s", "p", CorpusKind::Document, &cfg).unwrap();
            prop_assert_eq!(reconstruct(&chunks, &cfg), normalize_ws(&text));
            for c in &chunks {
                prop_assert!(!c.text.trim().is_empty());
                prop_assert!(c.approx_tokens as usize <= size);
            }
        }
    }
}
