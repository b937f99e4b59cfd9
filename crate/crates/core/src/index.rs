//! Hybrid dense + BM25 retrieval with a reranking second stage.
//!
//! Every query is scored against the whole index. The lexical score is
//! Okapi BM25, min-max normalized over all entries for that query, and
//! blended with cosine similarity:
//!
//! `hybrid = alpha * dense + (1 - alpha) * bm25_norm`
//!
//! Results are ordered by descending hybrid score, ties by ascending id.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provider::{Candidate, Embedder, EmbeddingVector, Reranker};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Stage sizes and blend weight for one retriever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub stage1_k: usize,
    pub final_k: usize,
    pub alpha: f64,
}

impl RetrievalConfig {
    pub const DEFAULT_ALPHA: f64 = 0.75;

    /// Documentation retriever: 10 hybrid candidates, 4 after reranking.
    pub const DOCUMENTS: Self = Self { stage1_k: 10, final_k: 4, alpha: Self::DEFAULT_ALPHA };
    /// Standards retriever, same shape as the documentation retriever.
    pub const CONTEXT: Self = Self { stage1_k: 10, final_k: 4, alpha: Self::DEFAULT_ALPHA };
    /// Question retriever used for pairing: 25 candidates, 5 after reranking.
    pub const QUESTIONS: Self = Self { stage1_k: 25, final_k: 5, alpha: Self::DEFAULT_ALPHA };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.final_k == 0 || self.final_k > self.stage1_k {
            return Err(Error::Config(format!("need 1 <= final_k ({}) <= stage1_k ({})", self.final_k, self.stage1_k)));
        }
        Ok(())
    }
}

/// An indexed text: a chunk or a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub dense_sim: f64,
    pub bm25_raw: f64,
    pub bm25_norm: f64,
    pub hybrid: f64,
}

/// Immutable search index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    entries: Vec<IndexEntry>,
    vectors: Vec<EmbeddingVector>,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    params: Bm25Params,
}

impl Index {
    /// Embeds every entry and builds the index.
    pub fn build<E: Embedder + ?Sized>(entries: Vec<IndexEntry>, embedder: &E, params: Bm25Params) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::IndexBuild("no entries to index".into()));
        }
        let texts: Vec<&str> = entries.iter().map(|e| e.text.as_str()).collect();
        let vectors = embedder.embed(&texts)?;
        Self::from_parts(entries, vectors, params)
    }

    /// Builds from precomputed vectors aligned with `entries`.
    pub fn from_parts(entries: Vec<IndexEntry>, vectors: Vec<EmbeddingVector>, params: Bm25Params) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::IndexBuild("no entries to index".into()));
        }
        if vectors.len() != entries.len() {
            return Err(Error::IndexBuild(format!("{} vectors for {} entries", vectors.len(), entries.len())));
        }
        let dim = vectors[0].dim();
        if let Some(i) = vectors.iter().position(|v| v.dim() != dim) {
            return Err(Error::IndexBuild(format!(
                "embedding dimension {} at entry {i} differs from {dim}",
                vectors[i].dim()
            )));
        }
        let mut ids = BTreeSet::new();
        for e in &entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::IndexBuild(format!("duplicate id `{}`", e.id)));
            }
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(entries.len());
        for (ordinal, entry) in entries.iter().enumerate() {
            let tokens = tokenize(&entry.text);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { ordinal: ordinal as u32, tf: count });
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let mean = total as f64 / doc_lengths.len() as f64;
        // Entries without any word token would make the mean zero.
        let avg_doc_length = if mean > 0.0 { mean } else { 1.0 };

        Ok(Self { entries, vectors, postings, doc_lengths, avg_doc_length, params })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, EmbeddingVector::dim)
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn text_of(&self, id: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.text.as_str())
    }

    /// Okapi BM25 inverse document frequency, `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.entries.len() as f64;
        let df = self.postings(term).len() as f64;
        libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
    }

    /// Raw BM25 of every entry for `query`; distinct query terms count once.
    pub fn bm25_scores(&self, query: &str) -> Vec<f64> {
        let mut scores = alloc::vec![0.0; self.entries.len()];
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let Bm25Params { k1, b } = self.params;
        for term in &terms {
            let idf = self.idf(term);
            for p in self.postings(term) {
                let tf = f64::from(p.tf);
                let dl = f64::from(self.doc_lengths[p.ordinal as usize]);
                let norm = k1 * (1.0 - b + b * dl / self.avg_doc_length);
                scores[p.ordinal as usize] += idf * tf * (k1 + 1.0) / (tf + norm);
            }
        }
        scores
    }

    /// Scores every entry and returns the top `k` by hybrid score.
    pub fn hybrid_search_with_vector(
        &self,
        query: &str,
        query_vector: &EmbeddingVector,
        k: usize,
        alpha: f64,
    ) -> Result<Vec<ScoredChunk>> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
        }
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        if query_vector.dim() != self.dim() {
            return Err(Error::Config(format!(
                "query embedding has dimension {}, index has {}",
                query_vector.dim(),
                self.dim()
            )));
        }
        let raw = self.bm25_scores(query);
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut scored: Vec<ScoredChunk> = self
            .entries
            .iter()
            .zip(&self.vectors)
            .zip(raw)
            .map(|((entry, vector), bm25_raw)| {
                let bm25_norm = if max > min { (bm25_raw - min) / (max - min) } else { 0.5 };
                let dense_sim = query_vector.dot(vector);
                ScoredChunk {
                    chunk_id: entry.id.clone(),
                    dense_sim,
                    bm25_raw,
                    bm25_norm,
                    hybrid: alpha * dense_sim + (1.0 - alpha) * bm25_norm,
                }
            })
            .collect();
        sort_ranked(&mut scored, |s| s.hybrid);
        scored.truncate(k);
        Ok(scored)
    }

    /// Embeds `query` and runs [`Index::hybrid_search_with_vector`].
    pub fn hybrid_search<E: Embedder + ?Sized>(
        &self,
        query: &str,
        embedder: &E,
        k: usize,
        alpha: f64,
    ) -> Result<Vec<ScoredChunk>> {
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        let vector =
            embedder.embed(&[query])?.pop().ok_or_else(|| Error::Config("embedder returned no vector".into()))?;
        self.hybrid_search_with_vector(query, &vector, k, alpha)
    }

    /// Two-stage retrieval: hybrid top `stage1_k`, then rerank to `final_k`.
    ///
    /// A reranker failure, or a reply naming ids outside the candidate set,
    /// falls back to hybrid order and sets [`Retrieval::degraded`].
    pub fn retrieve<E, R>(&self, query: &str, embedder: &E, reranker: &R, config: RetrievalConfig) -> Result<Retrieval>
    where
        E: Embedder + ?Sized,
        R: Reranker + ?Sized,
    {
        config.validate()?;
        let stage1 = self.hybrid_search(query, embedder, config.stage1_k, config.alpha)?;
        if stage1.is_empty() {
            return Ok(Retrieval { hits: stage1, degraded: false });
        }
        let candidates: Vec<Candidate<'_>> = stage1
            .iter()
            .map(|s| Candidate { id: &s.chunk_id, text: self.text_of(&s.chunk_id).unwrap_or_default() })
            .collect();
        let reranked = reranker
            .rerank(query, &candidates, config.final_k)
            .map_err(|e| format!("{e}"))
            .and_then(|ids| order_by_ids(&stage1, &ids, config.final_k));
        match reranked {
            Ok(hits) => Ok(Retrieval { hits, degraded: false }),
            Err(reason) => {
                log::warn!("reranker unavailable, using hybrid order: {reason}");
                let mut hits = stage1;
                hits.truncate(config.final_k);
                Ok(Retrieval { hits, degraded: true })
            }
        }
    }
}

/// Output of [`Index::retrieve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub hits: Vec<ScoredChunk>,
    /// Set when reranking failed and hybrid order was used instead.
    pub degraded: bool,
}

fn order_by_ids(
    stage1: &[ScoredChunk],
    ids: &[String],
    final_k: usize,
) -> core::result::Result<Vec<ScoredChunk>, String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids.iter().take(final_k) {
        if !seen.insert(id.as_str()) {
            return Err(format!("reranker repeated id `{id}`"));
        }
        let hit =
            stage1.iter().find(|s| &s.chunk_id == id).ok_or_else(|| format!("reranker returned unknown id `{id}`"))?;
        out.push(hit.clone());
    }
    Ok(out)
}

/// Sorts descending by `key`, ties by ascending id.
pub fn sort_ranked(items: &mut [ScoredChunk], key: impl Fn(&ScoredChunk) -> f64) {
    items.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.chunk_id.cmp(&b.chunk_id)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{FailingReranker, MockEmbedder, MockReranker};
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn entry(id: &str, text: &str) -> IndexEntry {
        IndexEntry { id: id.to_string(), text: text.to_string() }
    }

    fn build(entries: Vec<IndexEntry>) -> Index {
        Index::build(entries, &MockEmbedder::default(), Bm25Params::default()).unwrap()
    }

    #[test]
    fn single_entry_statistics() {
        let idx = build(vec![entry("c1", "alpha beta")]);
        let terms: Vec<&str> = idx.terms().collect();
        assert_eq!(terms, ["alpha", "beta"]);
        assert_eq!(idx.doc_lengths(), &[2]);
        assert_eq!(idx.avg_doc_length(), 2.0);
        assert_eq!(idx.postings("alpha"), &[Posting { ordinal: 0, tf: 1 }]);
    }

    #[test]
    fn build_errors() {
        let e = MockEmbedder::default();
        assert!(Index::build(vec![], &e, Bm25Params::default()).is_err());
        let dup = vec![entry("x", "a"), entry("x", "b")];
        assert!(Index::build(dup, &e, Bm25Params::default()).is_err());
        let mixed = vec![MockEmbedder::with_dim(4).embed_one("a"), MockEmbedder::with_dim(8).embed_one("b")];
        let err = Index::from_parts(vec![entry("a", "a"), entry("b", "b")], mixed, Bm25Params::default());
        assert!(matches!(err, Err(Error::IndexBuild(_))));
    }

    #[test]
    fn bm25_three_document_hand_values() {
        // N=3, avgdl=(3+1+2)/3=2, k1=1.2, b=0.75.
        // "cat": df=2 -> idf = ln(1 + 1.5/2.5) = ln 1.6
        //   d0: tf=2, dl=3 -> 1.2*(0.25+0.75*1.5)=1.65 -> ln1.6*2*2.2/3.65
        //   d2: tf=1, dl=2 -> 1.2 -> ln1.6*2.2/2.2 = ln1.6
        let idx = build(vec![entry("d0", "cat cat dog"), entry("d1", "dog"), entry("d2", "cat fish")]);
        let s = idx.bm25_scores("cat");
        let ln16 = 1.6f64.ln();
        assert!((s[0] - ln16 * 4.4 / 3.65).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!((s[2] - ln16).abs() < 1e-12);
    }

    #[test]
    fn query_term_repeats_count_once() {
        let idx = build(vec![entry("a", "cat"), entry("b", "dog")]);
        assert_eq!(idx.bm25_scores("cat cat"), idx.bm25_scores("cat"));
    }

    #[test]
    fn all_equal_bm25_normalizes_to_half() {
        let idx = build(vec![entry("a", "one"), entry("b", "two")]);
        let hits = idx.hybrid_search("zzz", &MockEmbedder::default(), 2, 0.75).unwrap();
        assert!(hits.iter().all(|h| h.bm25_norm == 0.5));
    }

    fn corpus() -> Index {
        build(vec![
            entry("c1", "software verification report approved"),
            entry("c2", "hazard log review meeting"),
            entry("c3", "verification plan for software modules"),
            entry("c4", "test report for integration tests"),
            entry("c5", "configuration management plan"),
        ])
    }

    #[test]
    fn degenerate_alpha_matches_single_signal() {
        let idx = corpus();
        let e = MockEmbedder::default();
        let q = "software verification plan";
        let dense = idx.hybrid_search(q, &e, 5, 1.0).unwrap();
        let mut by_dense = dense.clone();
        sort_ranked(&mut by_dense, |s| s.dense_sim);
        assert_eq!(dense, by_dense);

        let lexical = idx.hybrid_search(q, &e, 5, 0.0).unwrap();
        let mut by_bm25 = lexical.clone();
        sort_ranked(&mut by_bm25, |s| s.bm25_raw);
        let ids = |v: &[ScoredChunk]| v.iter().map(|s| s.chunk_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&lexical), ids(&by_bm25));
    }

    #[test]
    fn hybrid_is_exact_blend() {
        let idx = corpus();
        for hit in idx.hybrid_search("verification report", &MockEmbedder::default(), 5, 0.75).unwrap() {
            assert_eq!(hit.hybrid, 0.75 * hit.dense_sim + 0.25 * hit.bm25_norm);
            assert!((0.0..=1.0).contains(&hit.bm25_norm));
        }
    }

    #[test]
    fn parameter_validation() {
        let idx = corpus();
        let e = MockEmbedder::default();
        assert!(idx.hybrid_search("q", &e, 0, 0.5).is_err());
        assert!(idx.hybrid_search("q", &e, 3, 1.5).is_err());
        let wrong_dim = MockEmbedder::with_dim(16);
        assert!(matches!(idx.hybrid_search("q", &wrong_dim, 3, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn retrieve_truncates_small_corpus() {
        let idx = build(vec![entry("a", "alpha"), entry("b", "beta")]);
        let r = idx.retrieve("alpha", &MockEmbedder::default(), &MockReranker, RetrievalConfig::DOCUMENTS).unwrap();
        assert_eq!(r.hits.len(), 2);
        assert!(!r.degraded);
    }

    #[test]
    fn retrieve_falls_back_on_reranker_failure() {
        let idx = corpus();
        let e = MockEmbedder::default();
        let r = idx.retrieve("verification", &e, &FailingReranker, RetrievalConfig::DOCUMENTS).unwrap();
        assert!(r.degraded);
        let stage1 = idx.hybrid_search("verification", &e, 4, 0.75).unwrap();
        assert_eq!(r.hits, stage1);
    }

    #[test]
    fn retrieve_config_checked() {
        let bad = RetrievalConfig { stage1_k: 3, final_k: 4, alpha: 0.75 };
        assert!(corpus().retrieve("q", &MockEmbedder::default(), &MockReranker, bad).is_err());
    }

    proptest! {
        #[test]
        fn retrieve_is_subset_of_stage_one(
            texts in proptest::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,6}", 1..30),
            query in "[a-e]{1,3}( [a-e]{1,3}){0,3}",
        ) {
            let entries = texts.iter().enumerate().map(|(i, t)| entry(&format!("e{i:02}"), t)).collect();
            let idx = build(entries);
            let e = MockEmbedder::default();
            let stage1 = idx.hybrid_search(&query, &e, 10, 0.75).unwrap();
            let r = idx.retrieve(&query, &e, &MockReranker, RetrievalConfig::DOCUMENTS).unwrap();
            prop_assert!(r.hits.len() <= 4);
            prop_assert_eq!(r.hits.len(), stage1.len().min(4));
            for h in &r.hits {
                prop_assert!(stage1.iter().any(|s| s.chunk_id == h.chunk_id));
            }
        }

        #[test]
        fn equal_lexical_score_order_independent_of_alpha(
            texts in proptest::collection::vec("[a-d]{1,2}( [a-d]{1,2}){0,4}", 2..15),
            query in "[a-d]{1,2}( [a-d]{1,2}){0,2}",
            a1 in 0.01f64..1.0, a2 in 0.01f64..1.0,
        ) {
            let entries = texts.iter().enumerate().map(|(i, t)| entry(&format!("e{i:02}"), t)).collect();
            let idx = build(entries);
            let e = MockEmbedder::default();
            let n = idx.len();
            let r1 = idx.hybrid_search(&query, &e, n, a1).unwrap();
            let r2 = idx.hybrid_search(&query, &e, n, a2).unwrap();
            let pos = |r: &[ScoredChunk], id: &str| r.iter().position(|s| s.chunk_id == id).unwrap();
            for x in &r1 {
                for y in &r1 {
                    if x.chunk_id < y.chunk_id && x.bm25_norm == y.bm25_norm && x.dense_sim != y.dense_sim {
                        let before1 = pos(&r1, &x.chunk_id) < pos(&r1, &y.chunk_id);
                        let before2 = pos(&r2, &x.chunk_id) < pos(&r2, &y.chunk_id);
                        prop_assert_eq!(before1, before2);
                    }
                }
            }
        }
    }
}
