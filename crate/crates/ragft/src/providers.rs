//! Provider construction from configuration.

use std::sync::Arc;

use ragft_core::mock::{MockChat, MockEmbedder, MockReranker};
use ragft_core::{ChatModel, Embedder, Reranker};

use crate::config::{ProviderKind, Providers};
use crate::error::{AppError, AppResult};
use crate::http::{CohereReranker, OpenAiChat, OpenAiEmbedder};

/// The three model services used by every stage.
#[derive(Clone)]
pub struct ProviderSet {
    pub embedder: Arc<dyn Embedder>,
    pub reranker: Arc<dyn Reranker>,
    pub chat: Arc<dyn ChatModel>,
    /// Recorded in index sidecars; a mismatch on load is a configuration error.
    pub embedder_identity: String,
}

impl ProviderSet {
    pub fn mock() -> Self {
        Self {
            embedder: Arc::new(MockEmbedder::default()),
            reranker: Arc::new(MockReranker),
            chat: Arc::new(MockChat::new()),
            embedder_identity: "mock".into(),
        }
    }

    pub fn from_config(cfg: &Providers) -> AppResult<Self> {
        let embedder: Arc<dyn Embedder> = match cfg.embedder.kind {
            ProviderKind::Mock => Arc::new(MockEmbedder::default()),
            ProviderKind::Openai => Arc::new(OpenAiEmbedder::new(&cfg.embedder)?),
            ProviderKind::Cohere => return Err(unsupported("embedder", ProviderKind::Cohere)),
        };
        let reranker: Arc<dyn Reranker> = match cfg.reranker.kind {
            ProviderKind::Mock => Arc::new(MockReranker),
            ProviderKind::Cohere => Arc::new(CohereReranker::new(&cfg.reranker)?),
            ProviderKind::Openai => return Err(unsupported("reranker", ProviderKind::Openai)),
        };
        let chat: Arc<dyn ChatModel> = match cfg.chat.kind {
            ProviderKind::Mock => Arc::new(MockChat::new()),
            ProviderKind::Openai => Arc::new(OpenAiChat::new(&cfg.chat)?),
            ProviderKind::Cohere => return Err(unsupported("chat", ProviderKind::Cohere)),
        };
        Ok(Self { embedder, reranker, chat, embedder_identity: cfg.embedder.identity() })
    }
}

fn unsupported(role: &str, kind: ProviderKind) -> AppError {
    AppError::Config(format!("{role} does not support provider kind {kind:?}"))
}
