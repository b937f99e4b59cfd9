//! Deterministic offline providers.
//!
//! Every mock is a pure function of its inputs, so pipelines built on them
//! reproduce byte-for-byte across runs.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::pairing::SELECTION_MARKER;
use crate::prompt::{parse_answer_prompt, BEGIN_QUOTE, END_QUOTE};
use crate::provider::{
    check_chat_inputs, check_embed_inputs, check_rerank_inputs, Candidate, ChatModel, Embedder, EmbeddingVector,
    Message, ProviderError, Reranker, Role,
};
use crate::text::{normalize_ws, tokenize};

pub const MOCK_EMBEDDING_DIM: usize = 256;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Feature-hashed bag of words, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    dim: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self { dim: MOCK_EMBEDDING_DIM }
    }
}

impl MockEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dim];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            // Punctuation-only text still gets a stable, non-zero vector.
            values[(fnv1a(text.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        for token in &tokens {
            values[(fnv1a(token.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        EmbeddingVector::normalized(values).expect("hashed counts are non-zero")
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_embed_inputs(texts)?;
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

/// Jaccard overlap of the query's and candidate's token sets.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: BTreeSet<String> = tokenize(a).into_iter().collect();
    let b: BTreeSet<String> = tokenize(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Reranks by token-set Jaccard overlap; ties keep the incoming order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockReranker;

impl Reranker for MockReranker {
    fn rerank(&self, query: &str, candidates: &[Candidate<'_>], top_k: usize) -> Result<Vec<String>, ProviderError> {
        check_rerank_inputs(top_k)?;
        let mut scored: Vec<(f64, usize)> =
            candidates.iter().enumerate().map(|(i, c)| (jaccard(query, c.text), i)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(scored.into_iter().take(top_k).map(|(_, i)| candidates[i].id.to_string()).collect())
    }
}

/// A reranker that always fails, for exercising fallback paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailingReranker;

impl Reranker for FailingReranker {
    fn rerank(&self, _: &str, _: &[Candidate<'_>], _: usize) -> Result<Vec<String>, ProviderError> {
        Err(ProviderError::Exhausted {
            provider: "failing-reranker".into(),
            attempts: 1,
            message: "unavailable".into(),
        })
    }
}

#[derive(Debug, Clone)]
enum Fallback {
    /// Answers template prompts with quotes copied from the first blocks,
    /// selection prompts with the first candidate.
    Template,
    Fixed(String),
    Fail,
}

/// Chat mock keyed by a hash of the full message list.
#[derive(Debug, Clone)]
pub struct MockChat {
    canned: BTreeMap<u64, String>,
    fallback: Fallback,
}

impl Default for MockChat {
    fn default() -> Self {
        Self { canned: BTreeMap::new(), fallback: Fallback::Template }
    }
}

impl MockChat {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replies with `reply` to every prompt without a canned entry.
    pub fn fixed(reply: impl Into<String>) -> Self {
        Self { canned: BTreeMap::new(), fallback: Fallback::Fixed(reply.into()) }
    }

    /// Fails every prompt without a canned entry.
    pub fn failing() -> Self {
        Self { canned: BTreeMap::new(), fallback: Fallback::Fail }
    }

    pub fn with_canned(mut self, messages: &[Message], reply: impl Into<String>) -> Self {
        self.canned.insert(prompt_key(messages), reply.into());
        self
    }
}

/// Hash of a message list, used as the canned-reply key.
pub fn prompt_key(messages: &[Message]) -> u64 {
    let mut buf = Vec::new();
    for m in messages {
        let role = match m.role {
            Role::System => b's',
            Role::User => b'u',
            Role::Assistant => b'a',
        };
        buf.push(role);
        buf.extend_from_slice(m.content.as_bytes());
        buf.push(0);
    }
    fnv1a(&buf)
}

impl ChatModel for MockChat {
    fn chat(&self, messages: &[Message]) -> Result<String, ProviderError> {
        check_chat_inputs(messages)?;
        if let Some(reply) = self.canned.get(&prompt_key(messages)) {
            return Ok(reply.clone());
        }
        match &self.fallback {
            Fallback::Fixed(reply) => Ok(reply.clone()),
            Fallback::Fail => Err(ProviderError::Exhausted {
                provider: "mock-chat".into(),
                attempts: 1,
                message: "scripted failure".into(),
            }),
            Fallback::Template => {
                let prompt = messages
                    .iter()
                    .rev()
                    .find(|m| m.role == Role::User)
                    .map(|m| m.content.as_str())
                    .unwrap_or_default();
                Ok(template_reply(prompt))
            }
        }
    }
}

fn template_reply(prompt: &str) -> String {
    if prompt.contains(SELECTION_MARKER) {
        return if prompt.contains("\n1. ") { "1".into() } else { "NONE".into() };
    }
    match parse_answer_prompt(prompt) {
        Some(parsed) => compliant_answer(parsed.question, &parsed.docs),
        None => "No structured prompt was recognised.".into(),
    }
}

/// Leading sentence of `text` (normalized), capped at 30 words.
pub fn leading_sentence(text: &str) -> String {
    let normalized = normalize_ws(text);
    let mut end = normalized.len();
    if let Some(pos) = normalized.find(". ") {
        end = pos + 1;
    }
    let sentence = &normalized[..end];
    let words: Vec<&str> = sentence.split(' ').take(30).collect();
    words.join(" ")
}

/// A well-formed answer quoting the leading sentence of each document.
pub fn compliant_answer(question: &str, docs: &[&str]) -> String {
    let mut out = format!(
        "Step-by-step reasoning: the question asks \"{}\". Each block of the user \
         documentation was checked for direct evidence addressing it.\n\n",
        normalize_ws(question)
    );
    if docs.is_empty() {
        out.push_str("No user documentation was provided, so no evidence can be cited.\n\n");
    } else {
        out.push_str(
            "The following parts of the user documentation are relevant because they \
                      describe the requested evidence:\n\n",
        );
        for doc in docs {
            out.push_str(&format!("{BEGIN_QUOTE}{}{END_QUOTE}\n", leading_sentence(doc)));
        }
        out.push('\n');
    }
    out.push_str("Summary: the answer is based solely on the quoted user documentation.");
    out
}
