//! Interfaces to the three model services: embedding, reranking and chat.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Unit-length dense vector; dot product equals cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalizes `values`. Fails on empty, non-finite or all-zero input.
    pub fn normalized(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::Invalid("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Invalid("embedding contains non-finite values".into()));
        }
        let norm = libm::sqrt(values.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 {
            return Err(ProviderError::Invalid("zero-norm embedding".into()));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// A reranking candidate: id plus the text the reranker scores.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid provider response: {0}")]
    Invalid(String),

    #[error("{provider} failed after {attempts} attempt(s): {message}")]
    Exhausted { provider: String, attempts: u32, message: String },

    #[error("provider returned an empty completion")]
    EmptyCompletion,

    #[error("configuration error: {0}")]
    Config(String),
}

impl ProviderError {
    /// Whether repeating the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::EmptyCompletion)
    }
}

pub trait Embedder: Send + Sync {
    /// One unit vector per input text, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError>;

    /// Output dimension, when known ahead of a call.
    fn dim(&self) -> Option<usize> {
        None
    }
}

pub trait Reranker: Send + Sync {
    /// Up to `top_k` candidate ids ordered by decreasing relevance to `query`.
    fn rerank(&self, query: &str, candidates: &[Candidate<'_>], top_k: usize) -> Result<Vec<String>, ProviderError>;
}

pub trait ChatModel: Send + Sync {
    fn chat(&self, messages: &[Message]) -> Result<String, ProviderError>;
}

/// Shared preconditions for [`Embedder::embed`].
pub fn check_embed_inputs(texts: &[&str]) -> Result<(), ProviderError> {
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::Precondition(format!("text {i} is empty")));
    }
    Ok(())
}

/// Shared preconditions for [`ChatModel::chat`].
pub fn check_chat_inputs(messages: &[Message]) -> Result<(), ProviderError> {
    match messages.first() {
        None => Err(ProviderError::Precondition("chat needs at least one message".into())),
        Some(m) if m.role == Role::Assistant => {
            Err(ProviderError::Precondition("first message must be system or user".into()))
        }
        Some(_) => Ok(()),
    }
}

/// Shared preconditions for [`Reranker::rerank`].
pub fn check_rerank_inputs(top_k: usize) -> Result<(), ProviderError> {
    if top_k == 0 {
        return Err(ProviderError::Precondition("top_k must be at least 1".into()));
    }
    Ok(())
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed(texts)
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
}

impl<T: Reranker + ?Sized> Reranker for &T {
    fn rerank(&self, query: &str, candidates: &[Candidate<'_>], top_k: usize) -> Result<Vec<String>, ProviderError> {
        (**self).rerank(query, candidates, top_k)
    }
}

impl<T: ChatModel + ?Sized> ChatModel for &T {
    fn chat(&self, messages: &[Message]) -> Result<String, ProviderError> {
        (**self).chat(messages)
    }
}

impl<T: Embedder + ?Sized> Embedder for alloc::sync::Arc<T> {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed(texts)
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
}

impl<T: Reranker + ?Sized> Reranker for alloc::sync::Arc<T> {
    fn rerank(&self, query: &str, candidates: &[Candidate<'_>], top_k: usize) -> Result<Vec<String>, ProviderError> {
        (**self).rerank(query, candidates, top_k)
    }
}

impl<T: ChatModel + ?Sized> ChatModel for alloc::sync::Arc<T> {
    fn chat(&self, messages: &[Message]) -> Result<String, ProviderError> {
        (**self).chat(messages)
    }
}
