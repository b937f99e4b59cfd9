//! Corpus ingest, question loading and split bookkeeping.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ragft_core::chunk::{chunk_source, ensure_unique_ids, Chunk, ChunkingConfig, CorpusKind};
use ragft_core::question::{questions_from_records, Question, QuestionRecord};
use ragft_core::split::{split_corpus, SplitAssignment, SplitRatios};
use ragft_core::{Split, STANDARDS_PROJECT_ID};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io;

const TEXT_EXTENSIONS: &[&str] = &["txt", "md", "markdown"];

fn is_text_file(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| TEXT_EXTENSIONS.iter().any(|t| t.eq_ignore_ascii_case(e)))
}

/// Source identifier: `path` relative to `root`, with `/` separators.
fn source_name(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
}

/// Chunks every file in `paths`. Files are read in parallel; output is in
/// path order, then sequence order. Empty files are skipped with a warning.
pub fn ingest_documents(
    paths: &[PathBuf],
    root: &Path,
    project_id: &str,
    kind: CorpusKind,
    config: &ChunkingConfig,
) -> AppResult<Vec<Chunk>> {
    let mut paths = paths.to_vec();
    paths.sort();
    let per_file: Vec<AppResult<Vec<Chunk>>> = paths
        .par_iter()
        .map(|path| {
            let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
            let text = String::from_utf8(bytes)
                .map_err(|_| AppError::Format { path: path.clone(), message: "not valid UTF-8".into() })?;
            if text.trim().is_empty() {
                log::warn!("skipping empty file {}", path.display());
                return Ok(Vec::new());
            }
            Ok(chunk_source(&text, &source_name(path, root), project_id, kind, config)?)
        })
        .collect();
    let mut out = Vec::new();
    for chunks in per_file {
        out.extend(chunks?);
    }
    Ok(out)
}

/// Text files below `dir`, sorted.
pub fn text_files(dir: &Path) -> AppResult<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            AppError::io(path, e.into())
        })?;
        if entry.file_type().is_file() && is_text_file(entry.path()) {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Ingests a documentation root whose immediate subdirectories are
/// projects, plus the standards files or directories.
pub fn ingest_tree(docs_root: &Path, standards: &[PathBuf], config: &ChunkingConfig) -> AppResult<Vec<Chunk>> {
    let mut chunks = Vec::new();
    for project in project_dirs(docs_root)? {
        let name = project.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name == STANDARDS_PROJECT_ID {
            return Err(AppError::Config(format!("project directory may not be named {STANDARDS_PROJECT_ID}")));
        }
        let files = text_files(&project)?;
        chunks.extend(ingest_documents(&files, docs_root, &name, CorpusKind::Document, config)?);
    }
    for path in standards {
        let files = text_files(path)?;
        let root = if path.is_file() { path.parent().unwrap_or(Path::new("")) } else { path.as_path() };
        let mut ctx = ingest_documents(&files, root, STANDARDS_PROJECT_ID, CorpusKind::Context, config)?;
        for c in &mut ctx {
            c.source_doc = format!("{STANDARDS_PROJECT_ID}/{}", c.source_doc);
            c.id = ragft_core::chunk::chunk_id(&c.source_doc, c.seq, &c.text);
        }
        chunks.extend(ctx);
    }
    ensure_unique_ids(&chunks)?;
    Ok(chunks)
}

pub fn project_dirs(docs_root: &Path) -> AppResult<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(docs_root).map_err(|e| AppError::io(docs_root, e))? {
        let entry = entry.map_err(|e| AppError::io(docs_root, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Loads the authored JSON array of `{id, text, origin}` records.
pub fn load_questions(path: &Path, prefix: &str) -> AppResult<Vec<Question>> {
    let raw: Vec<serde_json::Value> = io::read_json(path)?;
    let mut records = Vec::with_capacity(raw.len());
    for (i, value) in raw.into_iter().enumerate() {
        let record: QuestionRecord = serde_json::from_value(value)
            .map_err(|e| AppError::Format { path: path.to_path_buf(), message: format!("question record {i}: {e}") })?;
        records.push(record);
    }
    Ok(questions_from_records(records, prefix)?)
}

pub type ChunkMap = BTreeMap<String, Chunk>;

pub fn chunk_map(chunks: Vec<Chunk>) -> ChunkMap {
    chunks.into_iter().map(|c| (c.id.clone(), c)).collect()
}

pub fn read_chunks(path: &Path) -> AppResult<Vec<Chunk>> {
    io::require(path, "ingest")?;
    io::read_jsonl(path)
}

pub fn read_questions(path: &Path) -> AppResult<Vec<Question>> {
    io::require(path, "ingest")?;
    io::read_jsonl(path)
}

pub fn question_map(questions: Vec<Question>) -> BTreeMap<String, Question> {
    questions.into_iter().map(|q| (q.id.clone(), q)).collect()
}

/// Persisted split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub ratios: SplitRatios,
    #[serde(flatten)]
    pub assignment: SplitAssignment,
}

impl SplitFile {
    pub fn compute(questions: &[Question], chunks: &[Chunk], ratios: SplitRatios, seed: u64) -> AppResult<Self> {
        let mut projects: Vec<String> =
            chunks.iter().filter(|c| c.corpus_kind == CorpusKind::Document).map(|c| c.project_id.clone()).collect();
        projects.sort();
        projects.dedup();
        let assignment = split_corpus(questions, &projects, ratios, seed)?;
        Ok(Self { ratios, assignment })
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        io::require(path, "ingest")?;
        io::read_json(path)
    }

    pub fn is_train_doc(&self, chunk: &Chunk) -> bool {
        chunk.corpus_kind == CorpusKind::Document
            && self.assignment.project_split(&chunk.project_id) == Some(Split::Train)
    }
}

/// Counts for the ingest summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestSummary {
    pub document_chunks: usize,
    pub context_chunks: usize,
    pub projects: BTreeMap<String, usize>,
    pub questions: usize,
    pub question_splits: BTreeMap<String, usize>,
    pub project_splits: BTreeMap<String, Vec<String>>,
    pub seed: u64,
}

impl IngestSummary {
    pub fn new(chunks: &[Chunk], questions: &[Question], splits: &SplitFile) -> Self {
        let mut s = Self { questions: questions.len(), seed: splits.assignment.seed, ..Default::default() };
        for c in chunks {
            match c.corpus_kind {
                CorpusKind::Document => {
                    s.document_chunks += 1;
                    *s.projects.entry(c.project_id.clone()).or_default() += 1;
                }
                CorpusKind::Context => s.context_chunks += 1,
            }
        }
        for split in [Split::Train, Split::Test, Split::Val] {
            let key = format!("{split:?}").to_lowercase();
            s.question_splits.insert(key.clone(), splits.assignment.questions_in(split).len());
            s.project_splits.insert(key, splits.assignment.projects_in(split).into_iter().map(String::from).collect());
        }
        s
    }
}
