//! Versioned index sidecar files.
//!
//! Format (JSON): `{"format": "ragft-index", "version": 1, "retriever":
//! "documents" | "context" | "questions", "embedder": "<identity>",
//! "dim": <usize>, "index": {..}}`. `index` holds entries, unit vectors,
//! postings, document lengths and BM25 parameters.

use std::path::Path;

use ragft_core::index::{Bm25Params, IndexEntry};
use ragft_core::Index;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io;
use crate::providers::ProviderSet;

pub const INDEX_FORMAT: &str = "ragft-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retriever {
    Documents,
    Context,
    Questions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexFile {
    pub format: String,
    pub version: u32,
    pub retriever: Retriever,
    pub embedder: String,
    pub dim: usize,
    pub index: Index,
}

impl IndexFile {
    pub fn build(
        retriever: Retriever,
        entries: Vec<IndexEntry>,
        providers: &ProviderSet,
        params: Bm25Params,
    ) -> AppResult<Self> {
        let index = Index::build(entries, &*providers.embedder, params)?;
        Ok(Self {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            retriever,
            embedder: providers.embedder_identity.clone(),
            dim: index.dim(),
            index,
        })
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        io::write_atomic(path, &serde_json::to_vec(self).expect("serializable index"))
    }

    /// Loads and checks format, version, retriever role and embedder.
    pub fn load(path: &Path, retriever: Retriever, embedder_identity: &str) -> AppResult<Index> {
        io::require(path, "index")?;
        let bad = |message: String| AppError::Format { path: path.to_path_buf(), message };
        let file: Self = io::read_json(path)?;
        if file.format != INDEX_FORMAT {
            return Err(bad(format!("not an index file (format `{}`)", file.format)));
        }
        if file.version != INDEX_VERSION {
            return Err(bad(format!("index version {} unsupported (expected {INDEX_VERSION})", file.version)));
        }
        if file.retriever != retriever {
            return Err(bad(format!("holds the {:?} index, expected {retriever:?}", file.retriever)));
        }
        if file.embedder != embedder_identity {
            return Err(AppError::Config(format!(
                "{} was built with embedder `{}` but `{embedder_identity}` is configured; rebuild with `index --force`",
                path.display(),
                file.embedder
            )));
        }
        if file.index.dim() != file.dim {
            return Err(bad(format!("recorded dim {} but vectors have {}", file.dim, file.index.dim())));
        }
        Ok(file.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries() -> Vec<IndexEntry> {
        vec![IndexEntry { id: "a".into(), text: "alpha beta".into() }]
    }

    #[test]
    fn round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        let p = ProviderSet::mock();
        IndexFile::build(Retriever::Context, entries(), &p, Bm25Params::default()).unwrap().save(&path).unwrap();
        let idx = IndexFile::load(&path, Retriever::Context, "mock").unwrap();
        assert_eq!(idx.doc_lengths(), [2]);
        assert_eq!(idx.avg_doc_length(), 2.0);
        assert!(IndexFile::load(&path, Retriever::Documents, "mock").is_err());
        assert!(matches!(IndexFile::load(&path, Retriever::Context, "other"), Err(AppError::Config(_))));

        let mut raw: serde_json::Value = io::read_json(&path).unwrap();
        raw["version"] = 99.into();
        io::write_json(&path, &raw).unwrap();
        let err = IndexFile::load(&path, Retriever::Context, "mock").unwrap_err();
        assert!(err.to_string().contains("version 99"));
    }
}
