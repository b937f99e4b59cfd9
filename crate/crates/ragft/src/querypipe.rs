//! Inference-time compliance query: dual retrieval, prompt, answer, quote
//! attribution.

use std::thread;
use std::time::Instant;

use ragft_core::dataset::answer_messages;
use ragft_core::index::Retrieval;
use ragft_core::quotes::{attribute_quotes, unmatched_fraction, AttributedQuote};
use ragft_core::{Index, RetrievalConfig, ScoredChunk};
use serde::{Deserialize, Serialize};

use crate::providers::ProviderSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    #[serde(flatten)]
    pub scores: ScoredChunk,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentAnswer {
    pub query: String,
    pub answer_text: String,
    pub retrieved_docs: Vec<RetrievedChunk>,
    pub retrieved_ctx: Vec<RetrievedChunk>,
    pub quotes: Vec<AttributedQuote>,
    pub unmatched_fraction: f64,
    /// Set when either reranker fell back to hybrid order.
    pub degraded: bool,
    pub latency_ms: f64,
}

/// A failed query, with whatever retrieval completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{error}")]
pub struct QueryFailure {
    pub error: String,
    pub retrieved_docs: Vec<RetrievedChunk>,
    pub retrieved_ctx: Vec<RetrievedChunk>,
}

pub struct QueryEngine {
    pub doc_index: Index,
    pub ctx_index: Index,
    pub providers: ProviderSet,
    pub config: RetrievalConfig,
}

fn with_text(index: &Index, hits: Vec<ScoredChunk>) -> Vec<RetrievedChunk> {
    hits.into_iter()
        .map(|s| RetrievedChunk { text: index.text_of(&s.chunk_id).unwrap_or_default().to_string(), scores: s })
        .collect()
}

impl QueryEngine {
    fn retrieve(&self, index: &Index, query: &str) -> ragft_core::Result<Retrieval> {
        index.retrieve(query, &*self.providers.embedder, &*self.providers.reranker, self.config)
    }

    /// Runs both retrievers concurrently. Failure of either aborts the query.
    pub fn answer_query(&self, query: &str) -> Result<AssessmentAnswer, QueryFailure> {
        let start = Instant::now();
        let fail = |error: String, docs, ctx| QueryFailure { error, retrieved_docs: docs, retrieved_ctx: ctx };
        if query.trim().is_empty() {
            return Err(fail("query is empty".into(), Vec::new(), Vec::new()));
        }
        let (docs, ctx) = thread::scope(|s| {
            let d = s.spawn(|| self.retrieve(&self.doc_index, query));
            let c = s.spawn(|| self.retrieve(&self.ctx_index, query));
            (d.join().expect("retrieval worker panicked"), c.join().expect("retrieval worker panicked"))
        });
        let (docs, ctx) = match (docs, ctx) {
            (Ok(d), Ok(c)) => (d, c),
            (d, c) => {
                let mut errors = Vec::new();
                let docs = match d {
                    Ok(r) => with_text(&self.doc_index, r.hits),
                    Err(e) => {
                        errors.push(format!("document retrieval: {e}"));
                        Vec::new()
                    }
                };
                let ctx = match c {
                    Ok(r) => with_text(&self.ctx_index, r.hits),
                    Err(e) => {
                        errors.push(format!("context retrieval: {e}"));
                        Vec::new()
                    }
                };
                return Err(fail(errors.join("; "), docs, ctx));
            }
        };
        let degraded = docs.degraded || ctx.degraded;
        let docs = with_text(&self.doc_index, docs.hits);
        let ctx = with_text(&self.ctx_index, ctx.hits);
        let doc_texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let ctx_texts: Vec<&str> = ctx.iter().map(|c| c.text.as_str()).collect();
        let messages = answer_messages(query, &doc_texts, &ctx_texts);
        let answer_text = match self.providers.chat.chat(&messages) {
            Ok(a) => a,
            Err(e) => return Err(fail(format!("chat: {e}"), docs, ctx)),
        };
        let quotes = attribute_quotes(&answer_text, docs.iter().map(|d| (d.scores.chunk_id.as_str(), d.text.as_str())));
        Ok(AssessmentAnswer {
            query: query.to_string(),
            unmatched_fraction: unmatched_fraction(&quotes),
            answer_text,
            retrieved_docs: docs,
            retrieved_ctx: ctx,
            quotes,
            degraded,
            latency_ms: start.elapsed().as_secs_f64() * 1000.0,
        })
    }
}
