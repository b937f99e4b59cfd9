//! Pipeline stages over on-disk artifacts. Each stage reads what earlier
//! stages wrote, refuses to overwrite without `force`, and returns a
//! serializable summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ragft_core::chunk::{Chunk, CorpusKind};
use ragft_core::dataset::{TrainingInstance, Violation};
use ragft_core::index::IndexEntry;
use ragft_core::pairing::{question_entries, PairingContext};
use ragft_core::question::{reference_stats, ReferenceStats};
use ragft_core::refextract::build_reference_map;
use ragft_core::review::ReviewStats;
use ragft_core::{Question, Split};
use serde::Serialize;

use crate::config::{Paths, RunConfig};
use crate::corpus::{self, IngestSummary, SplitFile};
use crate::datasetgen::{self, ExportOptions, ExportSummary, GenerateInputs, GenerateSummary};
use crate::error::AppResult;
use crate::indexfile::{IndexFile, Retriever};
use crate::io;
use crate::pairjournal::{self, PairSummary};
use crate::providers::ProviderSet;
use crate::querypipe::QueryEngine;
use crate::review_store::ReviewStore;

/// Configuration with paths resolved against the working directory.
pub struct Stage {
    pub config: RunConfig,
    pub paths: Paths,
}

impl Stage {
    pub fn new(config: RunConfig, workdir: &Path) -> Self {
        let paths = config.paths.resolve(workdir);
        Self { config, paths }
    }

    pub fn ingest(
        &self,
        docs_root: &Path,
        standards: &[PathBuf],
        questions: &Path,
        force: bool,
    ) -> AppResult<IngestSummary> {
        for p in [&self.paths.chunks, &self.paths.questions, &self.paths.splits] {
            io::ensure_writable(p, force)?;
        }
        let chunks = corpus::ingest_tree(docs_root, standards, &self.config.chunking)?;
        let mut qs = corpus::load_questions(questions, &self.config.question_prefix)?;
        let splits = SplitFile::compute(&qs, &chunks, self.config.split_ratios, self.config.seed)?;
        splits.assignment.apply(&mut qs);
        io::write_jsonl(&self.paths.chunks, &chunks)?;
        io::write_jsonl(&self.paths.questions, &qs)?;
        io::write_json(&self.paths.splits, &splits)?;
        Ok(IngestSummary::new(&chunks, &qs, &splits))
    }

    pub fn index(&self, providers: &ProviderSet, force: bool) -> AppResult<IndexSummary> {
        for p in [&self.paths.doc_index, &self.paths.ctx_index, &self.paths.question_index] {
            io::ensure_writable(p, force)?;
        }
        let chunks = corpus::read_chunks(&self.paths.chunks)?;
        let questions = corpus::read_questions(&self.paths.questions)?;
        let bm25 = self.config.retrieval.bm25();
        let entries = |kind: CorpusKind| -> Vec<IndexEntry> {
            chunks
                .iter()
                .filter(|c| c.corpus_kind == kind)
                .map(|c| IndexEntry { id: c.id.clone(), text: c.text.clone() })
                .collect()
        };
        let train_q: Vec<&Question> = questions.iter().filter(|q| q.split == Some(Split::Train)).collect();
        let docs = IndexFile::build(Retriever::Documents, entries(CorpusKind::Document), providers, bm25)?;
        let ctx = IndexFile::build(Retriever::Context, entries(CorpusKind::Context), providers, bm25)?;
        let qidx = IndexFile::build(Retriever::Questions, question_entries(train_q), providers, bm25)?;
        docs.save(&self.paths.doc_index)?;
        ctx.save(&self.paths.ctx_index)?;
        qidx.save(&self.paths.question_index)?;
        Ok(IndexSummary {
            documents: docs.index.len(),
            context: ctx.index.len(),
            questions: qidx.index.len(),
            dim: docs.dim,
            embedder: providers.embedder_identity.clone(),
        })
    }

    fn train_chunks(&self, chunks: &[Chunk], splits: &SplitFile) -> Vec<Chunk> {
        chunks.iter().filter(|c| splits.is_train_doc(c)).cloned().collect()
    }

    fn train_questions(&self) -> AppResult<BTreeMap<String, Question>> {
        let qs = corpus::read_questions(&self.paths.questions)?;
        Ok(corpus::question_map(qs.into_iter().filter(|q| q.split == Some(Split::Train)).collect()))
    }

    pub fn pair(&self, providers: &ProviderSet, resume: bool, force: bool) -> AppResult<PairSummary> {
        let chunks = corpus::read_chunks(&self.paths.chunks)?;
        let splits = SplitFile::read(&self.paths.splits)?;
        let question_index =
            IndexFile::load(&self.paths.question_index, Retriever::Questions, &providers.embedder_identity)?;
        let questions = self.train_questions()?;
        let context: Vec<Chunk> = chunks.iter().filter(|c| c.corpus_kind == CorpusKind::Context).cloned().collect();
        let refmap = build_reference_map(&context)?;
        let train = self.train_chunks(&chunks, &splits);
        let ctx = PairingContext {
            question_index: &question_index,
            questions: &questions,
            refmap: &refmap,
            embedder: &*providers.embedder,
            reranker: &*providers.reranker,
            llm: &*providers.chat,
            passage_budget: self.config.passage_budget,
            question_config: self.config.retrieval.question_config(),
        };
        pairjournal::build_pairs(
            &train,
            &ctx,
            &self.paths.pairs,
            resume,
            force,
            self.config.providers.chat.max_concurrency,
        )
    }

    pub fn generate(&self, providers: &ProviderSet, include_flagged: bool, force: bool) -> AppResult<GenerateReport> {
        for p in [&self.paths.instances, &self.paths.review_sample, &self.paths.export, &self.paths.export_meta] {
            io::ensure_writable(p, force)?;
        }
        let chunks = corpus::read_chunks(&self.paths.chunks)?;
        let splits = SplitFile::read(&self.paths.splits)?;
        let train = self.train_chunks(&chunks, &splits);
        let pairs = pairjournal::load_pairs(&self.paths.pairs, &train)?;
        let context_index = IndexFile::load(&self.paths.ctx_index, Retriever::Context, &providers.embedder_identity)?;
        let questions = self.train_questions()?;
        let chunk_map = corpus::chunk_map(chunks);
        let generated = datasetgen::generate(&GenerateInputs {
            chunks: &chunk_map,
            questions: &questions,
            pairs: &pairs,
            context_index: &context_index,
            splits: &splits,
            providers,
            context_config: self.config.retrieval.chunk_config(),
            seed: self.config.seed,
            review_fraction: self.config.review_fraction,
            concurrency: self.config.providers.chat.max_concurrency,
        })?;
        io::write_jsonl(&self.paths.instances, &generated.instances)?;
        io::write_json(&self.paths.review_sample, &generated.review_sample)?;
        let export = self.write_export(
            &generated.instances,
            &chunk_map,
            &questions,
            generated.review_sample.len(),
            include_flagged,
        )?;
        Ok(GenerateReport { generation: generated.summary, export })
    }

    fn write_export(
        &self,
        instances: &[TrainingInstance],
        chunks: &corpus::ChunkMap,
        questions: &BTreeMap<String, Question>,
        validation_entries: usize,
        include_flagged: bool,
    ) -> AppResult<ExportSummary> {
        let options = ExportOptions {
            include_flagged,
            seed: self.config.seed,
            hyperparameters: self.config.hyperparameters.clone(),
            validation_entries,
        };
        let (bytes, meta) = datasetgen::export_dataset(instances, chunks, questions, &options)?;
        datasetgen::write_export(&self.paths.export, &self.paths.export_meta, &bytes, &meta)?;
        Ok(meta.summary)
    }

    /// Re-exports with review decisions applied.
    pub fn export(&self, include_flagged: bool, force: bool) -> AppResult<ExportSummary> {
        for p in [&self.paths.export, &self.paths.export_meta] {
            io::ensure_writable(p, force)?;
        }
        io::require(&self.paths.instances, "generate")?;
        let chunk_map = corpus::chunk_map(corpus::read_chunks(&self.paths.chunks)?);
        let questions = self.train_questions()?;
        let mut instances: Vec<TrainingInstance> = io::read_jsonl(&self.paths.instances)?;
        let sample: Vec<String> = io::read_json(&self.paths.review_sample)?;
        let store = ReviewStore::open(&self.paths.reviews)?;
        datasetgen::apply_reviews(&mut instances, store.history(), &chunk_map)?;
        self.write_export(&instances, &chunk_map, &questions, sample.len(), include_flagged)
    }

    pub fn verify(&self) -> AppResult<Vec<Violation>> {
        let chunk_map = corpus::chunk_map(corpus::read_chunks(&self.paths.chunks)?);
        let questions = corpus::question_map(corpus::read_questions(&self.paths.questions)?);
        let splits = SplitFile::read(&self.paths.splits)?;
        datasetgen::verify_dataset(&self.paths.export, &self.paths.export_meta, &chunk_map, &questions, &splits)
    }

    pub fn query_engine(&self, providers: &ProviderSet) -> AppResult<QueryEngine> {
        let id = &providers.embedder_identity;
        Ok(QueryEngine {
            doc_index: IndexFile::load(&self.paths.doc_index, Retriever::Documents, id)?,
            ctx_index: IndexFile::load(&self.paths.ctx_index, Retriever::Context, id)?,
            providers: providers.clone(),
            config: self.config.retrieval.chunk_config(),
        })
    }

    pub fn question_stats(&self) -> AppResult<ReferenceStats> {
        Ok(reference_stats(&corpus::read_questions(&self.paths.questions)?))
    }

    pub fn review_stats(&self) -> AppResult<ReviewStats> {
        io::require(&self.paths.review_sample, "generate")?;
        let sample: Vec<String> = io::read_json(&self.paths.review_sample)?;
        Ok(ReviewStore::open(&self.paths.reviews)?.stats(&sample))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexSummary {
    pub documents: usize,
    pub context: usize,
    pub questions: usize,
    pub dim: usize,
    pub embedder: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateReport {
    pub generation: GenerateSummary,
    pub export: ExportSummary,
}
