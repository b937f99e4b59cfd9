//! Dataset generation, export and integrity checking over files.

use std::collections::BTreeMap;
use std::path::Path;
use std::thread;

use ragft_core::chunk::{Chunk, CorpusKind};
use ragft_core::dataset::{
    answer_instance, export_decision, export_messages, golden_doc_texts, plan_instances, sample_for_review,
    verify_lines, verify_record, ExportDecision, ExportLine, FineTuneHyperparameters, InstanceStatus, PlanInputs,
    TrainingInstance, VerifyContext, Violation, ViolationKind,
};
use ragft_core::pairing::Pair;
use ragft_core::review::{latest_decisions, ReviewDecision};
use ragft_core::{seeded_rng, ChatModel, Index, Message, Question, RetrievalConfig, Split};
use serde::{Deserialize, Serialize};

use crate::corpus::{ChunkMap, SplitFile};
use crate::error::{AppError, AppResult};
use crate::io;
use crate::providers::ProviderSet;

/// Seed offset for the review sample, kept apart from the planning stream.
const REVIEW_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

pub const EXPORT_FORMAT: &str = "ragft-export";
pub const EXPORT_VERSION: u32 = 1;

pub struct GenerateInputs<'a> {
    pub chunks: &'a ChunkMap,
    /// Training questions only.
    pub questions: &'a BTreeMap<String, Question>,
    pub pairs: &'a [Pair],
    pub context_index: &'a Index,
    pub splits: &'a SplitFile,
    pub providers: &'a ProviderSet,
    pub context_config: RetrievalConfig,
    pub seed: u64,
    pub review_fraction: f64,
    pub concurrency: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GenerateSummary {
    pub groups: usize,
    pub valid: usize,
    pub flagged: usize,
    pub failed: usize,
    pub review_sample: usize,
    pub m_histogram: BTreeMap<usize, usize>,
    pub n_histogram: BTreeMap<usize, usize>,
    pub seed: u64,
}

pub struct Generated {
    pub instances: Vec<TrainingInstance>,
    pub review_sample: Vec<String>,
    pub summary: GenerateSummary,
}

/// Plans instances on one seeded stream, then answers them with bounded
/// concurrency. Output is ordered by instance id.
pub fn generate(inputs: &GenerateInputs<'_>) -> AppResult<Generated> {
    let doc_pool: Vec<String> =
        inputs.chunks.values().filter(|c| inputs.splits.is_train_doc(c)).map(|c| c.id.clone()).collect();
    let ctx_pool: Vec<String> =
        inputs.chunks.values().filter(|c| c.corpus_kind == CorpusKind::Context).map(|c| c.id.clone()).collect();
    let train_pairs: Vec<Pair> = inputs
        .pairs
        .iter()
        .filter(|p| p.question_id.as_ref().is_none_or(|q| inputs.questions.contains_key(q)))
        .filter(|p| inputs.chunks.get(&p.chunk_id).is_some_and(|c| inputs.splits.is_train_doc(c)))
        .cloned()
        .collect();
    let plan = PlanInputs {
        pairs: &train_pairs,
        questions: inputs.questions,
        context_index: inputs.context_index,
        doc_pool: &doc_pool,
        ctx_pool: &ctx_pool,
        embedder: &*inputs.providers.embedder,
        reranker: &*inputs.providers.reranker,
        context_config: inputs.context_config,
    };
    let mut rng = seeded_rng(inputs.seed);
    let mut instances = plan_instances(&plan, &mut rng)?;

    let llm: &dyn ChatModel = &*inputs.providers.chat;
    for batch in instances.chunks_mut(inputs.concurrency.max(1)) {
        let results: Vec<AppResult<()>> = thread::scope(|s| {
            let handles: Vec<_> = batch
                .iter_mut()
                .map(|inst| {
                    s.spawn(move || {
                        let q = &inputs.questions[&inst.question_id];
                        answer_instance(inst, q, inputs.chunks, llm).map_err(AppError::from)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("generation worker panicked")).collect()
        });
        results.into_iter().collect::<AppResult<Vec<()>>>()?;
    }

    let ids: Vec<String> = instances.iter().map(|i| i.instance_id.clone()).collect();
    let review_sample = if ids.is_empty() {
        Vec::new()
    } else {
        sample_for_review(&ids, inputs.review_fraction, &mut seeded_rng(inputs.seed ^ REVIEW_STREAM))?
    };
    let mut summary = GenerateSummary {
        groups: instances.len(),
        review_sample: review_sample.len(),
        seed: inputs.seed,
        ..Default::default()
    };
    for inst in &instances {
        match inst.status {
            InstanceStatus::Valid => summary.valid += 1,
            InstanceStatus::Flagged => summary.flagged += 1,
            InstanceStatus::Failed | InstanceStatus::Pending => summary.failed += 1,
        }
        *summary.m_histogram.entry(inst.m()).or_default() += 1;
        *summary.n_histogram.entry(inst.n()).or_default() += 1;
    }
    Ok(Generated { instances, review_sample, summary })
}

/// Replays the latest review decision per instance onto `instances`.
pub fn apply_reviews(
    instances: &mut [TrainingInstance],
    history: &[ReviewDecision],
    chunks: &ChunkMap,
) -> AppResult<usize> {
    let latest = latest_decisions(history);
    let mut applied = 0;
    for inst in instances.iter_mut() {
        if let Some(d) = latest.get(inst.instance_id.as_str()) {
            let golden = golden_doc_texts(inst, chunks)?;
            inst.apply_decision(d, &golden)?;
            applied += 1;
        }
    }
    Ok(applied)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub exported: usize,
    pub skipped: usize,
    pub flagged: usize,
}

/// Sidecar describing an export: provenance, hyperparameters for the
/// external fine-tuning job, and one entry per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub hyperparameters: FineTuneHyperparameters,
    pub training_entries: usize,
    pub validation_entries: usize,
    pub approx_tokens: u64,
    pub summary: ExportSummary,
    pub dataset_sha256: String,
    pub lines: Vec<ExportLine>,
}

/// One exported record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub messages: Vec<Message>,
}

pub struct ExportOptions {
    pub include_flagged: bool,
    pub seed: u64,
    pub hyperparameters: FineTuneHyperparameters,
    pub validation_entries: usize,
}

/// Serializes the exportable instances. Returns the JSONL bytes and sidecar.
pub fn export_dataset(
    instances: &[TrainingInstance],
    chunks: &ChunkMap,
    questions: &BTreeMap<String, Question>,
    options: &ExportOptions,
) -> AppResult<(Vec<u8>, ExportMeta)> {
    let mut bytes = Vec::new();
    let mut lines = Vec::new();
    let mut summary = ExportSummary::default();
    let mut approx_tokens = 0u64;
    for inst in instances {
        let flagged = match export_decision(inst, options.include_flagged) {
            ExportDecision::Skip => {
                summary.skipped += 1;
                continue;
            }
            ExportDecision::Export => false,
            ExportDecision::ExportFlagged => true,
        };
        let question =
            questions.get(&inst.question_id).ok_or_else(|| ragft_core::Error::UnknownId(inst.question_id.clone()))?;
        let record = ChatRecord { messages: export_messages(inst, question, chunks)? };
        approx_tokens += record.messages.iter().map(|m| m.content.split_whitespace().count() as u64).sum::<u64>();
        serde_json::to_writer(&mut bytes, &record).expect("serializable record");
        bytes.push(b'\n');
        lines.push(ExportLine::new(lines.len(), inst, flagged));
        summary.exported += 1;
        if flagged {
            summary.flagged += 1;
        }
    }
    let meta = ExportMeta {
        format: EXPORT_FORMAT.into(),
        version: EXPORT_VERSION,
        seed: options.seed,
        hyperparameters: options.hyperparameters.clone(),
        training_entries: summary.exported,
        validation_entries: options.validation_entries,
        approx_tokens,
        summary,
        dataset_sha256: io::sha256_hex(&bytes),
        lines,
    };
    Ok((bytes, meta))
}

pub fn write_export(path: &Path, meta_path: &Path, bytes: &[u8], meta: &ExportMeta) -> AppResult<()> {
    io::write_atomic(path, bytes)?;
    io::write_json(meta_path, meta)
}

/// Runs every integrity check over an export and its sidecar.
pub fn verify_dataset(
    export_path: &Path,
    meta_path: &Path,
    chunks: &ChunkMap,
    questions: &BTreeMap<String, Question>,
    splits: &SplitFile,
) -> AppResult<Vec<Violation>> {
    io::require(export_path, "generate")?;
    io::require(meta_path, "generate")?;
    let text = std::fs::read_to_string(export_path).map_err(|e| AppError::io(export_path, e))?;
    let meta: ExportMeta = io::read_json(meta_path)?;
    let raw_lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();

    let mut violations = verify_lines(&raw_lines, &meta.lines);
    let is_train_doc = |c: &Chunk| splits.is_train_doc(c);
    let is_train_question =
        |q: &Question| q.split == Some(Split::Train) || splits.assignment.question_split(&q.id) == Some(Split::Train);
    let ctx = VerifyContext { chunks, questions, is_train_doc: &is_train_doc, is_train_question: &is_train_question };
    for (i, line) in raw_lines.iter().enumerate() {
        let record: ChatRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                violations.push(Violation {
                    line: Some(i),
                    kind: ViolationKind::Structure,
                    detail: format!("unparseable record: {e}"),
                });
                continue;
            }
        };
        if let Some(m) = meta.lines.get(i) {
            violations.extend(verify_record(&record.messages, m, &ctx));
        }
    }
    Ok(violations)
}
