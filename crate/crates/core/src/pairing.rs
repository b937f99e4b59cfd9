//! Linking each training chunk to its single most relevant question.
//!
//! Candidates come from the question retriever (25 hybrid, 5 reranked).
//! The chat model then sees the chunk, the numbered candidates and every
//! standards passage the candidates cite, and replies with an ordinal or
//! `NONE`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::chunk::Chunk;
use crate::error::Result;
use crate::index::{Index, RetrievalConfig};
use crate::provider::{ChatModel, Embedder, Message, ProviderError, Reranker};
use crate::question::Question;
use crate::refextract::{resolve, Passage, RefMap, Reference};

/// First line of every selection prompt.
pub const SELECTION_MARKER: &str = "## Question selection";

/// Passage budget (whitespace tokens) for cited standards text per prompt.
pub const DEFAULT_PASSAGE_BUDGET: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Selected,
    NoMatch,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub chunk_id: String,
    pub question_id: Option<String>,
    pub candidate_ids: Vec<String>,
    pub selection_rationale: String,
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl Pair {
    fn none(chunk_id: &str, candidate_ids: Vec<String>, rationale: String, diagnostic: Option<String>) -> Self {
        Self {
            chunk_id: chunk_id.into(),
            question_id: None,
            candidate_ids,
            selection_rationale: rationale,
            status: PairStatus::NoMatch,
            diagnostic,
        }
    }

    pub fn is_paired(&self) -> bool {
        self.status == PairStatus::Selected && self.question_id.is_some()
    }
}

/// Index entries for the question retriever.
pub fn question_entries<'a>(questions: impl IntoIterator<Item = &'a Question>) -> Vec<crate::index::IndexEntry> {
    questions.into_iter().map(|q| crate::index::IndexEntry { id: q.id.clone(), text: q.text.clone() }).collect()
}

/// Candidate questions for `chunk` from the question index.
pub fn candidate_questions<'q, E, R>(
    chunk: &Chunk,
    question_index: &Index,
    questions: &'q BTreeMap<String, Question>,
    embedder: &E,
    reranker: &R,
    config: RetrievalConfig,
) -> Result<Vec<&'q Question>>
where
    E: Embedder + ?Sized,
    R: Reranker + ?Sized,
{
    let retrieval = question_index.retrieve(&chunk.text, embedder, reranker, config)?;
    Ok(retrieval.hits.iter().filter_map(|h| questions.get(&h.chunk_id)).collect())
}

/// Renders the selection prompt. Passages beyond `passage_budget` tokens are
/// dropped.
pub fn selection_prompt(chunk: &Chunk, candidates: &[&Question], refmap: &RefMap, passage_budget: usize) -> String {
    let mut prompt = format!(
        "{SELECTION_MARKER}\n\
         You are matching a passage of safety-critical software documentation to the \
         compliance question it best provides evidence for.\n\n\
         Documentation chunk:\n\"\"\"\n{}\n\"\"\"\n\nCandidate questions:\n",
        chunk.text
    );
    for (i, q) in candidates.iter().enumerate() {
        prompt.push_str(&format!("{}. {}\n", i + 1, q.text));
    }
    let passages = cited_passages(candidates, refmap, passage_budget);
    prompt.push_str("\nReferenced standard passages:\n");
    if passages.is_empty() {
        prompt.push_str("None.\n");
    }
    for p in &passages {
        prompt.push_str(&format!("[{}]\n{}\n\n", p.path, p.text));
    }
    prompt.push_str(&format!(
        "\nReply with the number (1-{}) of the single most relevant question, or NONE if the \
         chunk supports none of them, followed by one sentence of rationale.",
        candidates.len()
    ));
    prompt
}

/// Passages cited by any candidate, in candidate order, within budget.
pub fn cited_passages(candidates: &[&Question], refmap: &RefMap, budget: usize) -> Vec<Passage> {
    let refs: Vec<Reference> = candidates.iter().flat_map(|q| q.references.iter().cloned()).collect();
    let mut used = 0;
    resolve(&refs, refmap)
        .passages
        .into_iter()
        .take_while(|p| {
            used += p.text.split_whitespace().count();
            used <= budget
        })
        .collect()
}

const STRICT_SUFFIX: &str = "\n\nYour previous reply could not be parsed. Reply with only a \
                             number from the candidate list, or NONE.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Ordinal(usize),
    NoMatch,
}

/// Parses a selection reply against `n` candidates.
pub fn parse_selection(reply: &str, n: usize) -> Option<Selection> {
    let trimmed = reply.trim();
    let lead: String = trimmed.chars().take_while(|c| c.is_alphabetic()).collect();
    if lead.eq_ignore_ascii_case("none") {
        return Some(Selection::NoMatch);
    }
    let digits: String = trimmed.chars().skip_while(|c| !c.is_ascii_digit()).take_while(char::is_ascii_digit).collect();
    if let Ok(k) = digits.parse::<usize>() {
        if (1..=n).contains(&k) {
            return Some(Selection::Ordinal(k));
        }
    }
    let has_none_word = trimmed.split(|c: char| !c.is_alphanumeric()).any(|w| w.eq_ignore_ascii_case("none"));
    has_none_word.then_some(Selection::NoMatch)
}

/// Asks the chat model to choose among `candidates`.
///
/// An unparseable reply is retried once with a stricter instruction; a
/// second failure yields a `NONE` pair with a diagnostic.
pub fn select_question<C: ChatModel + ?Sized>(
    chunk: &Chunk,
    candidates: &[&Question],
    refmap: &RefMap,
    llm: &C,
    passage_budget: usize,
) -> core::result::Result<Pair, ProviderError> {
    let candidate_ids: Vec<String> = candidates.iter().map(|q| q.id.clone()).collect();
    if candidates.is_empty() {
        return Ok(Pair::none(&chunk.id, candidate_ids, String::new(), None));
    }
    let prompt = selection_prompt(chunk, candidates, refmap, passage_budget);
    let mut reply = llm.chat(&[Message::user(prompt.clone())])?;
    let mut parsed = parse_selection(&reply, candidates.len());
    if parsed.is_none() {
        reply = llm.chat(&[Message::user(format!("{prompt}{STRICT_SUFFIX}"))])?;
        parsed = parse_selection(&reply, candidates.len());
    }
    Ok(match parsed {
        Some(Selection::Ordinal(k)) => Pair {
            chunk_id: chunk.id.clone(),
            question_id: Some(candidate_ids[k - 1].clone()),
            candidate_ids,
            selection_rationale: reply,
            status: PairStatus::Selected,
            diagnostic: None,
        },
        Some(Selection::NoMatch) => Pair::none(&chunk.id, candidate_ids, reply, None),
        None => Pair::none(&chunk.id, candidate_ids, reply, Some("selection reply unparseable after retry".into())),
    })
}

/// Everything needed to pair one chunk.
pub struct PairingContext<'a, E: ?Sized, R: ?Sized, C: ?Sized> {
    pub question_index: &'a Index,
    pub questions: &'a BTreeMap<String, Question>,
    pub refmap: &'a RefMap,
    pub embedder: &'a E,
    pub reranker: &'a R,
    pub llm: &'a C,
    pub passage_budget: usize,
    /// Normally [`RetrievalConfig::QUESTIONS`].
    pub question_config: RetrievalConfig,
}

impl<E, R, C> PairingContext<'_, E, R, C>
where
    E: Embedder + ?Sized,
    R: Reranker + ?Sized,
    C: ChatModel + ?Sized,
{
    /// Pairs one chunk. Failures become [`PairStatus::Failed`] records.
    pub fn pair_chunk(&self, chunk: &Chunk) -> Pair {
        let candidates = match candidate_questions(
            chunk,
            self.question_index,
            self.questions,
            self.embedder,
            self.reranker,
            self.question_config,
        ) {
            Ok(c) => c,
            Err(e) => return failed(chunk, Vec::new(), format!("candidate retrieval: {e}")),
        };
        match select_question(chunk, &candidates, self.refmap, self.llm, self.passage_budget) {
            Ok(pair) => pair,
            Err(e) => failed(chunk, candidates.iter().map(|q| q.id.clone()).collect(), format!("selection: {e}")),
        }
    }
}

fn failed(chunk: &Chunk, candidate_ids: Vec<String>, diagnostic: String) -> Pair {
    log::warn!("pairing chunk {} failed: {diagnostic}", chunk.id);
    Pair {
        chunk_id: chunk.id.clone(),
        question_id: None,
        candidate_ids,
        selection_rationale: String::new(),
        status: PairStatus::Failed,
        diagnostic: Some(diagnostic),
    }
}
