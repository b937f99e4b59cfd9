//! Run configuration: one JSON file, overridable from the command line.
//! Secrets never live here; providers name the environment variable that
//! holds their API key.

use std::path::{Path, PathBuf};
use std::time::Duration;

use ragft_core::chunk::ChunkingConfig;
use ragft_core::dataset::FineTuneHyperparameters;
use ragft_core::index::{Bm25Params, RetrievalConfig};
use ragft_core::question::DEFAULT_QUESTION_PREFIX;
use ragft_core::split::SplitRatios;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Deterministic offline implementation.
    Mock,
    /// OpenAI-compatible `/embeddings` and `/chat/completions`.
    Openai,
    /// Cohere-compatible `/rerank`.
    Cohere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    /// Texts per embedding request.
    pub batch_size: usize,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: String::new(),
            model_name: "mock".into(),
            api_key_env: None,
            timeout_secs: 60.0,
            max_retries: 3,
            max_concurrency: 4,
            batch_size: 64,
            backoff_base_ms: 500,
            backoff_cap_ms: 8_000,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self, role: &str) -> AppResult<()> {
        if self.max_concurrency == 0 {
            return Err(AppError::Config(format!("{role}: max_concurrency must be >= 1")));
        }
        if self.batch_size == 0 {
            return Err(AppError::Config(format!("{role}: batch_size must be >= 1")));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(AppError::Config(format!("{role}: timeout_secs must be positive")));
        }
        if self.kind != ProviderKind::Mock && self.endpoint.is_empty() {
            return Err(AppError::Config(format!("{role}: endpoint is required for {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Reads the API key from the configured environment variable.
    pub fn api_key(&self) -> AppResult<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| AppError::Config(format!("environment variable {var} is not set"))),
        }
    }

    /// Identity recorded in index sidecars, used to detect a swapped embedder.
    pub fn identity(&self) -> String {
        match self.kind {
            ProviderKind::Mock => "mock".into(),
            _ => format!("{:?}:{}@{}", self.kind, self.model_name, self.endpoint).to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Providers {
    pub embedder: ProviderConfig,
    pub reranker: ProviderConfig,
    pub chat: ProviderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSettings {
    pub alpha: f64,
    pub stage1_k: usize,
    pub final_k: usize,
    pub question_stage1_k: usize,
    pub question_final_k: usize,
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        let d = RetrievalConfig::DOCUMENTS;
        let q = RetrievalConfig::QUESTIONS;
        let bm = Bm25Params::default();
        Self {
            alpha: d.alpha,
            stage1_k: d.stage1_k,
            final_k: d.final_k,
            question_stage1_k: q.stage1_k,
            question_final_k: q.final_k,
            k1: bm.k1,
            b: bm.b,
        }
    }
}

impl RetrievalSettings {
    /// Shared by the documentation and standards retrievers.
    pub fn chunk_config(&self) -> RetrievalConfig {
        RetrievalConfig { stage1_k: self.stage1_k, final_k: self.final_k, alpha: self.alpha }
    }

    pub fn question_config(&self) -> RetrievalConfig {
        RetrievalConfig { stage1_k: self.question_stage1_k, final_k: self.question_final_k, alpha: self.alpha }
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }

    pub fn validate(&self) -> AppResult<()> {
        self.chunk_config().validate()?;
        self.question_config().validate()?;
        if !(self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b)) {
            return Err(AppError::Config(format!("BM25 k1={} b={} out of range", self.k1, self.b)));
        }
        Ok(())
    }
}

/// Artifact locations, relative to the working directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub chunks: PathBuf,
    pub questions: PathBuf,
    pub splits: PathBuf,
    pub doc_index: PathBuf,
    pub ctx_index: PathBuf,
    pub question_index: PathBuf,
    pub pairs: PathBuf,
    pub instances: PathBuf,
    pub review_sample: PathBuf,
    pub reviews: PathBuf,
    pub export: PathBuf,
    pub export_meta: PathBuf,
    pub static_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            chunks: "chunks.jsonl".into(),
            questions: "questions.jsonl".into(),
            splits: "splits.json".into(),
            doc_index: "index/documents.json".into(),
            ctx_index: "index/context.json".into(),
            question_index: "index/questions.json".into(),
            pairs: "pairs.jsonl".into(),
            instances: "instances.jsonl".into(),
            review_sample: "review_sample.json".into(),
            reviews: "reviews.jsonl".into(),
            export: "dataset.jsonl".into(),
            export_meta: "dataset.meta.json".into(),
            static_dir: "review-ui/dist".into(),
        }
    }
}

impl Paths {
    pub fn resolve(&self, workdir: &Path) -> Self {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { workdir.join(p) };
        Self {
            chunks: r(&self.chunks),
            questions: r(&self.questions),
            splits: r(&self.splits),
            doc_index: r(&self.doc_index),
            ctx_index: r(&self.ctx_index),
            question_index: r(&self.question_index),
            pairs: r(&self.pairs),
            instances: r(&self.instances),
            review_sample: r(&self.review_sample),
            reviews: r(&self.reviews),
            export: r(&self.export),
            export_meta: r(&self.export_meta),
            static_dir: r(&self.static_dir),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub providers: Providers,
    pub retrieval: RetrievalSettings,
    pub chunking: ChunkingConfig,
    pub split_ratios: SplitRatios,
    pub question_prefix: String,
    pub seed: u64,
    pub review_fraction: f64,
    pub passage_budget: usize,
    pub hyperparameters: FineTuneHyperparameters,
    pub bind: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            providers: Providers::default(),
            retrieval: RetrievalSettings::default(),
            chunking: ChunkingConfig::default(),
            split_ratios: SplitRatios::default(),
            question_prefix: DEFAULT_QUESTION_PREFIX.into(),
            seed: 42,
            review_fraction: 0.10,
            passage_budget: ragft_core::pairing::DEFAULT_PASSAGE_BUDGET,
            hyperparameters: FineTuneHyperparameters::default(),
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let cfg: Self = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> AppResult<()> {
        self.providers.embedder.validate("embedder")?;
        self.providers.reranker.validate("reranker")?;
        self.providers.chat.validate("chat")?;
        self.retrieval.validate()?;
        self.chunking.validate()?;
        self.split_ratios.validate()?;
        if !(self.review_fraction > 0.0 && self.review_fraction <= 1.0) {
            return Err(AppError::Config(format!("review_fraction {} outside (0, 1]", self.review_fraction)));
        }
        Ok(())
    }
}
