//! Core algorithms for a dual-retrieval compliance assistant and the
//! generator of its retrieval-augmented fine-tuning dataset.
//!
//! Everything here is `no_std` + `alloc`: chunking, Okapi BM25 and hybrid
//! scoring, two-stage retrieval, section/annex reference extraction,
//! chunk-to-question pairing, golden/distractor dataset assembly, quote
//! validation, and the blind evaluation arithmetic. Model services are
//! reached through the [`provider`] traits; deterministic offline
//! implementations live in [`mock`]. File formats, HTTP clients and the
//! CLI live in the `ragft` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chunk;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod index;
pub mod mock;
pub mod pairing;
pub mod prompt;
pub mod provider;
pub mod question;
pub mod quotes;
pub mod refextract;
pub mod review;
pub mod split;
pub mod text;

pub use chunk::{Chunk, ChunkingConfig, CorpusKind, STANDARDS_PROJECT_ID};
pub use error::{Error, Result};
pub use index::{Index, RetrievalConfig, ScoredChunk};
pub use provider::{ChatModel, Embedder, EmbeddingVector, Message, ProviderError, Reranker, Role};
pub use question::{Origin, Question, Split};
pub use refextract::{RefMap, Reference, ReferenceKind};

/// Deterministic RNG used for every seeded draw in the pipeline.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Creates the pipeline RNG for `seed`.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
