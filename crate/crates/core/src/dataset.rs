//! Fine-tuning dataset assembly.
//!
//! Pairs are grouped per question into random golden sets of 1..=4 chunks,
//! each group gets 1..=4 golden standards chunks from the context
//! retriever, and both sides are padded with uniformly sampled distractors
//! to exactly four documents and four contexts. Answers are generated from
//! the golden chunks only, while exported records show golden and
//! distractor blocks together in shuffled order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chunk::{Chunk, CorpusKind};
use crate::error::{Error, Result};
use crate::index::{Index, RetrievalConfig};
use crate::pairing::Pair;
use crate::prompt::{parse_answer_prompt, render_answer_prompt, SYSTEM_PREAMBLE};
use crate::provider::{ChatModel, Embedder, Message, ProviderError, Reranker, Role};
use crate::question::Question;
use crate::quotes::{is_verbatim, scan_quotes};
use crate::review::{ReviewDecision, ReviewStatus, Verdict};
use crate::SeededRng;

/// Documents and contexts shown per training record.
pub const BLOCKS_PER_SECTION: usize = 4;
/// Upper bound for the golden set sizes m and n.
pub const MAX_GOLDEN: usize = 4;

/// Appended to the prompt when a first answer fails validation.
pub const CORRECTIVE_INSTRUCTION: &str = "Your previous answer did not follow the required \
format. Quote sentences from the **User Documentation** exactly as written, each enclosed in \
##begin_quote## and ##end_quote##, and finish with a summary paragraph.";

/// Fine-tuning hyperparameters passed through to the external training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneHyperparameters {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate_multiplier: f64,
}

impl Default for FineTuneHyperparameters {
    fn default() -> Self {
        Self { epochs: 1, batch_size: 4, learning_rate_multiplier: 0.2 }
    }
}

/// Golden documents for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub question_id: String,
    pub golden_docs: Vec<String>,
}

/// Partitions each question's paired chunks into random groups of 1..=4.
///
/// Questions are visited in id order; each question's chunk ids are sorted,
/// shuffled, then cut greedily with sizes drawn uniformly from 1..=4 (the
/// last group takes whatever remains). Unpaired records are ignored.
pub fn group_pairs(pairs: &[Pair], rng: &mut SeededRng) -> Vec<Group> {
    let mut by_question: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for pair in pairs.iter().filter(|p| p.is_paired()) {
        if let Some(q) = pair.question_id.as_deref() {
            by_question.entry(q).or_default().push(&pair.chunk_id);
        }
    }
    let mut groups = Vec::new();
    for (question_id, mut chunks) in by_question {
        chunks.sort_unstable();
        chunks.dedup();
        chunks.shuffle(rng);
        let mut rest = chunks.as_slice();
        while !rest.is_empty() {
            let size = rng.gen_range(1..=MAX_GOLDEN).min(rest.len());
            let (head, tail) = rest.split_at(size);
            groups.push(Group {
                question_id: question_id.to_string(),
                golden_docs: head.iter().map(|s| s.to_string()).collect(),
            });
            rest = tail;
        }
    }
    groups
}

/// Draws n in 1..=4 and takes the first n reranked context chunks.
///
/// When fewer than n chunks are retrievable, n shrinks to what is available;
/// an empty result is an error.
pub fn attach_context<E, R>(
    question: &Question,
    context_index: &Index,
    embedder: &E,
    reranker: &R,
    config: RetrievalConfig,
    rng: &mut SeededRng,
) -> Result<Vec<String>>
where
    E: Embedder + ?Sized,
    R: Reranker + ?Sized,
{
    let n = rng.gen_range(1..=MAX_GOLDEN);
    let retrieval = context_index.retrieve(&question.text, embedder, reranker, config)?;
    let golden: Vec<String> = retrieval.hits.into_iter().take(n).map(|h| h.chunk_id).collect();
    if golden.is_empty() {
        return Err(Error::Generation {
            question_id: question.id.clone(),
            reason: "no context chunks retrievable".into(),
        });
    }
    Ok(golden)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    /// Not yet answered.
    #[default]
    Pending,
    /// Answer passed validation.
    Valid,
    /// Answer failed validation after one regeneration.
    Flagged,
    /// The chat provider failed.
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub quotes: Vec<String>,
    pub all_verbatim: bool,
    pub offending_quotes: Vec<String>,
    pub format_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.all_verbatim && self.format_ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub instance_id: String,
    pub question_id: String,
    pub golden_docs: Vec<String>,
    pub distractor_docs: Vec<String>,
    pub golden_ctx: Vec<String>,
    pub distractor_ctx: Vec<String>,
    pub doc_order: Vec<String>,
    pub ctx_order: Vec<String>,
    #[serde(default)]
    pub answer: String,
    #[serde(default)]
    pub validation: Option<ValidationReport>,
    #[serde(default)]
    pub status: InstanceStatus,
    #[serde(default)]
    pub review_status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl TrainingInstance {
    pub fn m(&self) -> usize {
        self.golden_docs.len()
    }

    pub fn n(&self) -> usize {
        self.golden_ctx.len()
    }

    /// The answer that goes into the export: the reviewer's edit if any.
    pub fn effective_answer(&self) -> &str {
        self.edited_answer.as_deref().unwrap_or(&self.answer)
    }

    pub fn effective_validation(&self) -> Option<&ValidationReport> {
        if self.edited_answer.is_some() {
            self.edited_validation.as_ref()
        } else {
            self.validation.as_ref()
        }
    }

    /// Checks the structural invariants of a planned instance.
    pub fn check_structure(&self) -> core::result::Result<(), String> {
        check_section("doc", &self.golden_docs, &self.distractor_docs, &self.doc_order)?;
        check_section("ctx", &self.golden_ctx, &self.distractor_ctx, &self.ctx_order)
    }

    /// Applies a validated review decision. Edits are re-validated against
    /// the golden document texts.
    pub fn apply_decision(&mut self, decision: &ReviewDecision, golden_texts: &[&str]) -> Result<()> {
        decision.validate()?;
        if decision.instance_id != self.instance_id {
            return Err(Error::Invalid(format!(
                "decision for `{}` applied to `{}`",
                decision.instance_id, self.instance_id
            )));
        }
        self.review_status = decision.status.into();
        match (&decision.edited_answer, decision.status) {
            (Some(edit), Verdict::MinorEdit | Verdict::MajorEdit) => {
                self.edited_validation = Some(validate_answer(edit, golden_texts));
                self.edited_answer = Some(edit.clone());
            }
            _ => {
                self.edited_answer = None;
                self.edited_validation = None;
            }
        }
        Ok(())
    }
}

fn check_section(
    label: &str,
    golden: &[String],
    distractors: &[String],
    order: &[String],
) -> core::result::Result<(), String> {
    if golden.is_empty() || golden.len() > MAX_GOLDEN {
        return Err(format!("{label}: golden count {} outside 1..=4", golden.len()));
    }
    if golden.len() + distractors.len() != BLOCKS_PER_SECTION {
        return Err(format!(
            "{label}: {} golden + {} distractors != {BLOCKS_PER_SECTION}",
            golden.len(),
            distractors.len()
        ));
    }
    let golden_set: BTreeSet<&String> = golden.iter().collect();
    let distractor_set: BTreeSet<&String> = distractors.iter().collect();
    if golden_set.len() != golden.len() || distractor_set.len() != distractors.len() {
        return Err(format!("{label}: repeated chunk id"));
    }
    if let Some(id) = golden_set.intersection(&distractor_set).next() {
        return Err(format!("{label}: `{id}` is both golden and distractor"));
    }
    let mut expected: Vec<&String> = golden_set.union(&distractor_set).copied().collect();
    let mut got: Vec<&String> = order.iter().collect();
    expected.sort();
    got.sort();
    if expected != got {
        return Err(format!("{label}: order is not a permutation of golden + distractors"));
    }
    Ok(())
}

/// Samples `count` ids uniformly without replacement from `pool ∖ exclude`.
fn sample_complement(pool: &[String], exclude: &[String], count: usize, rng: &mut SeededRng) -> Option<Vec<String>> {
    let excluded: BTreeSet<&str> = exclude.iter().map(String::as_str).collect();
    let eligible: Vec<&String> = pool.iter().filter(|id| !excluded.contains(id.as_str())).collect();
    if eligible.len() < count {
        return None;
    }
    let picked = rand::seq::index::sample(rng, eligible.len(), count);
    Some(picked.into_iter().map(|i| eligible[i].clone()).collect())
}

/// Pads the golden sets with distractors and shuffles presentation order.
///
/// `doc_pool` and `ctx_pool` must be sorted for reproducibility.
pub fn inject_distractors(
    instance_id: String,
    group: Group,
    golden_ctx: Vec<String>,
    doc_pool: &[String],
    ctx_pool: &[String],
    rng: &mut SeededRng,
) -> Result<TrainingInstance> {
    let m = group.golden_docs.len();
    let n = golden_ctx.len();
    let exhausted = |what: &str| Error::Generation {
        question_id: group.question_id.clone(),
        reason: format!("{what} pool too small for distractors"),
    };
    if !(1..=MAX_GOLDEN).contains(&m) || !(1..=MAX_GOLDEN).contains(&n) {
        return Err(Error::Generation {
            question_id: group.question_id.clone(),
            reason: format!("golden sizes m={m}, n={n} outside 1..=4"),
        });
    }
    let distractor_docs = sample_complement(doc_pool, &group.golden_docs, BLOCKS_PER_SECTION - m, rng)
        .ok_or_else(|| exhausted("document"))?;
    let distractor_ctx =
        sample_complement(ctx_pool, &golden_ctx, BLOCKS_PER_SECTION - n, rng).ok_or_else(|| exhausted("context"))?;

    let mut doc_order: Vec<String> = group.golden_docs.iter().chain(&distractor_docs).cloned().collect();
    doc_order.shuffle(rng);
    let mut ctx_order: Vec<String> = golden_ctx.iter().chain(&distractor_ctx).cloned().collect();
    ctx_order.shuffle(rng);

    Ok(TrainingInstance {
        instance_id,
        question_id: group.question_id,
        golden_docs: group.golden_docs,
        distractor_docs,
        golden_ctx,
        distractor_ctx,
        doc_order,
        ctx_order,
        answer: String::new(),
        validation: None,
        status: InstanceStatus::Pending,
        review_status: ReviewStatus::Unreviewed,
        edited_answer: None,
        edited_validation: None,
        diagnostic: None,
    })
}

/// Inputs for [`plan_instances`].
pub struct PlanInputs<'a, E: ?Sized, R: ?Sized> {
    pub pairs: &'a [Pair],
    pub questions: &'a BTreeMap<String, Question>,
    pub context_index: &'a Index,
    /// Sorted ids of every training document chunk.
    pub doc_pool: &'a [String],
    /// Sorted ids of every standards chunk.
    pub ctx_pool: &'a [String],
    pub embedder: &'a E,
    pub reranker: &'a R,
    /// Normally [`RetrievalConfig::CONTEXT`], matching inference.
    pub context_config: RetrievalConfig,
}

/// Groups, attaches context and injects distractors on one seeded stream.
/// Instances come back without answers, ordered by instance id.
pub fn plan_instances<E, R>(inputs: &PlanInputs<'_, E, R>, rng: &mut SeededRng) -> Result<Vec<TrainingInstance>>
where
    E: Embedder + ?Sized,
    R: Reranker + ?Sized,
{
    let groups = group_pairs(inputs.pairs, rng);
    let mut ordinal: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let question =
            inputs.questions.get(&group.question_id).ok_or_else(|| Error::UnknownId(group.question_id.clone()))?;
        let golden_ctx = attach_context(
            question,
            inputs.context_index,
            inputs.embedder,
            inputs.reranker,
            inputs.context_config,
            rng,
        )?;
        let k = ordinal.entry(group.question_id.clone()).or_default();
        let id = instance_id(&group.question_id, *k);
        *k += 1;
        out.push(inject_distractors(id, group, golden_ctx, inputs.doc_pool, inputs.ctx_pool, rng)?);
    }
    out.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok(out)
}

pub fn instance_id(question_id: &str, ordinal: usize) -> String {
    format!("{question_id}-g{ordinal:03}")
}

fn texts<'a>(ids: &[String], chunks: &'a BTreeMap<String, Chunk>) -> Result<Vec<&'a str>> {
    ids.iter().map(|id| chunks.get(id).map(|c| c.text.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))).collect()
}

/// System + user messages for the answer prompt.
pub fn answer_messages(question: &str, docs: &[&str], contexts: &[&str]) -> Vec<Message> {
    alloc::vec![Message::system(SYSTEM_PREAMBLE), Message::user(render_answer_prompt(question, docs, contexts)),]
}

/// Golden chunks only, in presentation order.
pub fn generation_messages(
    instance: &TrainingInstance,
    question: &Question,
    chunks: &BTreeMap<String, Chunk>,
) -> Result<Vec<Message>> {
    let golden_docs: BTreeSet<&String> = instance.golden_docs.iter().collect();
    let golden_ctx: BTreeSet<&String> = instance.golden_ctx.iter().collect();
    let docs: Vec<String> = instance.doc_order.iter().filter(|id| golden_docs.contains(id)).cloned().collect();
    let ctx: Vec<String> = instance.ctx_order.iter().filter(|id| golden_ctx.contains(id)).cloned().collect();
    Ok(answer_messages(&question.text, &texts(&docs, chunks)?, &texts(&ctx, chunks)?))
}

/// Golden and distractor chunks in presentation order, plus the answer.
pub fn export_messages(
    instance: &TrainingInstance,
    question: &Question,
    chunks: &BTreeMap<String, Chunk>,
) -> Result<Vec<Message>> {
    let mut messages =
        answer_messages(&question.text, &texts(&instance.doc_order, chunks)?, &texts(&instance.ctx_order, chunks)?);
    messages.push(Message::assistant(instance.effective_answer()));
    Ok(messages)
}

/// Texts of the golden documents, in presentation order.
pub fn golden_doc_texts<'a>(instance: &TrainingInstance, chunks: &'a BTreeMap<String, Chunk>) -> Result<Vec<&'a str>> {
    let golden: BTreeSet<&String> = instance.golden_docs.iter().collect();
    let ids: Vec<String> = instance.doc_order.iter().filter(|id| golden.contains(id)).cloned().collect();
    texts(&ids, chunks)
}

/// Checks quote traceability and answer layout.
///
/// Every marker-delimited span must occur in some golden document after
/// whitespace normalization. The layout needs reasoning before the first
/// quote, at least one well-formed quote, and a summary after the last.
pub fn validate_answer(answer: &str, golden_docs: &[&str]) -> ValidationReport {
    let scan = scan_quotes(answer);
    let offending: Vec<String> =
        scan.spans.iter().filter(|span| !golden_docs.iter().any(|doc| is_verbatim(span, doc))).cloned().collect();
    let reasoning = answer.find(crate::prompt::BEGIN_QUOTE).is_some_and(|i| !answer[..i].trim().is_empty());
    let summary = answer
        .rfind(crate::prompt::END_QUOTE)
        .is_some_and(|i| !answer[i + crate::prompt::END_QUOTE.len()..].trim().is_empty());
    let format_ok = !scan.spans.is_empty() && !scan.unterminated && !scan.stray_end && reasoning && summary;
    ValidationReport { all_verbatim: offending.is_empty(), quotes: scan.spans, offending_quotes: offending, format_ok }
}

/// Generates and validates the answer for one instance, regenerating once
/// with a corrective instruction when validation fails.
pub fn answer_instance<C: ChatModel + ?Sized>(
    instance: &mut TrainingInstance,
    question: &Question,
    chunks: &BTreeMap<String, Chunk>,
    llm: &C,
) -> Result<()> {
    let mut messages = generation_messages(instance, question, chunks)?;
    let golden = golden_doc_texts(instance, chunks)?;
    let attempt = |msgs: &[Message]| -> core::result::Result<(String, ValidationReport), ProviderError> {
        let reply = llm.chat(msgs)?;
        let report = validate_answer(&reply, &golden);
        Ok((reply, report))
    };
    let outcome = attempt(&messages).and_then(|(reply, report)| {
        if report.passed() {
            return Ok((reply, report));
        }
        if let Some(user) = messages.iter_mut().rev().find(|m| m.role == Role::User) {
            user.content.push_str("\n\n");
            user.content.push_str(CORRECTIVE_INSTRUCTION);
        }
        attempt(&messages)
    });
    match outcome {
        Ok((reply, report)) => {
            instance.status = if report.passed() { InstanceStatus::Valid } else { InstanceStatus::Flagged };
            instance.answer = reply;
            instance.validation = Some(report);
            instance.diagnostic = None;
        }
        Err(e) => {
            log::warn!("answer generation for {} failed: {e}", instance.instance_id);
            instance.status = InstanceStatus::Failed;
            instance.diagnostic = Some(format!("{e}"));
        }
    }
    Ok(())
}

/// Uniform sample of `round(fraction * N)` ids (at least one), sorted.
pub fn sample_for_review(ids: &[String], fraction: f64, rng: &mut SeededRng) -> Result<Vec<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Invalid(format!("review fraction {fraction} outside (0, 1]")));
    }
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    let count = (libm::round(fraction * ids.len() as f64) as usize).clamp(1, ids.len());
    let mut out: Vec<String> =
        rand::seq::index::sample(rng, sorted.len(), count).into_iter().map(|i| sorted[i].clone()).collect();
    out.sort();
    Ok(out)
}

/// Why an instance was or was not exported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportDecision {
    Export,
    ExportFlagged,
    Skip,
}

/// Valid (or validly edited) instances export; flagged ones only with
/// `include_flagged`; failed, pending and rejected ones never.
pub fn export_decision(instance: &TrainingInstance, include_flagged: bool) -> ExportDecision {
    if instance.review_status == ReviewStatus::Rejected {
        return ExportDecision::Skip;
    }
    match instance.status {
        InstanceStatus::Pending | InstanceStatus::Failed => return ExportDecision::Skip,
        InstanceStatus::Valid | InstanceStatus::Flagged => {}
    }
    match instance.effective_validation() {
        Some(v) if v.passed() => ExportDecision::Export,
        _ if include_flagged => ExportDecision::ExportFlagged,
        _ => ExportDecision::Skip,
    }
}

/// Sidecar entry for one exported line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportLine {
    pub line: usize,
    pub instance_id: String,
    pub question_id: String,
    pub m: usize,
    pub n: usize,
    pub golden_docs: Vec<String>,
    pub distractor_docs: Vec<String>,
    pub golden_ctx: Vec<String>,
    pub distractor_ctx: Vec<String>,
    pub doc_order: Vec<String>,
    pub ctx_order: Vec<String>,
    pub flagged: bool,
}

impl ExportLine {
    pub fn new(line: usize, instance: &TrainingInstance, flagged: bool) -> Self {
        Self {
            line,
            instance_id: instance.instance_id.clone(),
            question_id: instance.question_id.clone(),
            m: instance.m(),
            n: instance.n(),
            golden_docs: instance.golden_docs.clone(),
            distractor_docs: instance.distractor_docs.clone(),
            golden_ctx: instance.golden_ctx.clone(),
            distractor_ctx: instance.distractor_ctx.clone(),
            doc_order: instance.doc_order.clone(),
            ctx_order: instance.ctx_order.clone(),
            flagged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Structure,
    BlockCount,
    PromptMismatch,
    UnknownChunk,
    Leakage,
    NonVerbatimQuote,
    DuplicateLine,
    MetadataMismatch,
    Roles,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub line: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

/// What a verifier knows about the corpus.
pub struct VerifyContext<'a> {
    pub chunks: &'a BTreeMap<String, Chunk>,
    pub questions: &'a BTreeMap<String, Question>,
    /// Whether a document chunk belongs to a training project.
    pub is_train_doc: &'a dyn Fn(&Chunk) -> bool,
    /// Whether a question belongs to the training split.
    pub is_train_question: &'a dyn Fn(&Question) -> bool,
}

/// Checks one exported record against its sidecar entry.
pub fn verify_record(messages: &[Message], meta: &ExportLine, ctx: &VerifyContext<'_>) -> Vec<Violation> {
    let mut out = Vec::new();
    let line = Some(meta.line);
    let mut push = |kind, detail: String| out.push(Violation { line, kind, detail });

    let roles: Vec<Role> = messages.iter().map(|m| m.role).collect();
    if roles != [Role::System, Role::User, Role::Assistant] {
        push(ViolationKind::Roles, format!("expected system/user/assistant, got {roles:?}"));
        return out;
    }
    if messages[0].content != SYSTEM_PREAMBLE {
        push(ViolationKind::Roles, "system message differs from the assessor preamble".into());
    }

    if meta.m != meta.golden_docs.len() || meta.n != meta.golden_ctx.len() {
        push(ViolationKind::MetadataMismatch, format!("m/n ({}, {}) disagree with golden lists", meta.m, meta.n));
    }
    if let Err(e) = check_section("doc", &meta.golden_docs, &meta.distractor_docs, &meta.doc_order) {
        push(ViolationKind::Structure, e);
    }
    if let Err(e) = check_section("ctx", &meta.golden_ctx, &meta.distractor_ctx, &meta.ctx_order) {
        push(ViolationKind::Structure, e);
    }

    match ctx.questions.get(&meta.question_id) {
        None => push(ViolationKind::UnknownChunk, format!("unknown question `{}`", meta.question_id)),
        Some(q) if !(ctx.is_train_question)(q) => {
            push(ViolationKind::Leakage, format!("question `{}` is not a training question", q.id))
        }
        Some(_) => {}
    }

    let mut resolvable = true;
    for id in meta.doc_order.iter().chain(&meta.golden_docs).chain(&meta.distractor_docs) {
        match ctx.chunks.get(id) {
            None => {
                resolvable = false;
                push(ViolationKind::UnknownChunk, format!("unknown document chunk `{id}`"));
            }
            Some(c) if c.corpus_kind != CorpusKind::Document => {
                push(ViolationKind::Structure, format!("`{id}` is not a document chunk"))
            }
            Some(c) if !(ctx.is_train_doc)(c) => {
                push(ViolationKind::Leakage, format!("chunk `{id}` from non-training project `{}`", c.project_id))
            }
            Some(_) => {}
        }
    }
    for id in meta.ctx_order.iter().chain(&meta.golden_ctx).chain(&meta.distractor_ctx) {
        match ctx.chunks.get(id) {
            None => {
                resolvable = false;
                push(ViolationKind::UnknownChunk, format!("unknown context chunk `{id}`"));
            }
            Some(c) if c.corpus_kind != CorpusKind::Context => {
                push(ViolationKind::Structure, format!("`{id}` is not a context chunk"))
            }
            Some(_) => {}
        }
    }

    let user = &messages[1].content;
    match parse_answer_prompt(user) {
        None => push(ViolationKind::BlockCount, "user message does not follow the prompt template".into()),
        Some(parsed) => {
            if parsed.docs.len() != BLOCKS_PER_SECTION || parsed.contexts.len() != BLOCKS_PER_SECTION {
                push(
                    ViolationKind::BlockCount,
                    format!(
                        "{} doc blocks and {} ctx blocks, expected 4 + 4",
                        parsed.docs.len(),
                        parsed.contexts.len()
                    ),
                );
            }
            if let (true, Some(q)) = (resolvable, ctx.questions.get(&meta.question_id)) {
                let docs: Vec<&str> = meta.doc_order.iter().map(|id| ctx.chunks[id].text.as_str()).collect();
                let ctxs: Vec<&str> = meta.ctx_order.iter().map(|id| ctx.chunks[id].text.as_str()).collect();
                if render_answer_prompt(&q.text, &docs, &ctxs) != *user {
                    push(ViolationKind::PromptMismatch, "user message differs from the re-rendered prompt".into());
                }
            }
        }
    }

    if resolvable {
        let golden: Vec<&str> = meta.golden_docs.iter().map(|id| ctx.chunks[id].text.as_str()).collect();
        let report = validate_answer(&messages[2].content, &golden);
        for span in report.offending_quotes {
            push(ViolationKind::NonVerbatimQuote, format!("quote not found in golden documents: {span:?}"));
        }
    }
    out
}

/// Dataset-level checks: line/metadata alignment and duplicates.
pub fn verify_lines(raw_lines: &[&str], meta: &[ExportLine]) -> Vec<Violation> {
    let mut out = Vec::new();
    if raw_lines.len() != meta.len() {
        out.push(Violation {
            line: None,
            kind: ViolationKind::MetadataMismatch,
            detail: format!("{} records but {} metadata entries", raw_lines.len(), meta.len()),
        });
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, line) in raw_lines.iter().enumerate() {
        if let Some(first) = seen.insert(line, i) {
            out.push(Violation {
                line: Some(i),
                kind: ViolationKind::DuplicateLine,
                detail: format!("line {i} duplicates line {first}"),
            });
        }
    }
    let mut ids = BTreeSet::new();
    for (i, m) in meta.iter().enumerate() {
        if m.line != i {
            out.push(Violation {
                line: Some(i),
                kind: ViolationKind::MetadataMismatch,
                detail: format!("metadata entry {i} names line {}", m.line),
            });
        }
        if !ids.insert(m.instance_id.as_str()) {
            out.push(Violation {
                line: Some(i),
                kind: ViolationKind::DuplicateLine,
                detail: format!("instance `{}` exported twice", m.instance_id),
            });
        }
    }
    out
}
