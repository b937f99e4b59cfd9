//! The answer prompt shared by dataset generation, export and inference.
//!
//! One renderer serves all three so that training inputs match what the
//! model sees at query time.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// System message placed before every rendered prompt.
pub const SYSTEM_PREAMBLE: &str = "You are an independent safety-critical software assessor. \
You judge whether user documentation provides evidence of compliance with the applicable \
safety standard, citing the documentation verbatim.";

pub const BEGIN_QUOTE: &str = "##begin_quote##";
pub const END_QUOTE: &str = "##end_quote##";

const DOCS_OPEN: &str = "===================== **User Documentation**=====================\n";
const DOCS_CLOSE: &str = "\n=================================================================\n";
const CTX_OPEN: &str = "--------------------- **Contextual Information** ----------------\n";
const CTX_CLOSE: &str = "\n-----------------------------------------------------------------\n";
const QUESTION_OPEN: &str = "**Question:** ";
const QUESTION_CLOSE: &str = "\n**Important Guidelines:**";

const DOC_LABEL: &str = "Document";
const CTX_LABEL: &str = "Context";

/// Renders the answer prompt. Blocks appear in the given order.
pub fn render_answer_prompt(question: &str, docs: &[&str], contexts: &[&str]) -> String {
    let user_docs = render_blocks(DOC_LABEL, docs);
    let context = render_blocks(CTX_LABEL, contexts);
    format!(
        "You will be provided with some documentation and supporting context:\n\
{DOCS_OPEN}{user_docs}{DOCS_CLOSE}\
{CTX_OPEN}{context}{CTX_CLOSE}\
Based **solely** on the **User Documentation**\n\
and by enhancing your analysis utilising the **Contextual Information**\n\
please answer the following question.\n\
{QUESTION_OPEN}{question}{QUESTION_CLOSE}\"\n\
- **Do NOT** use any prior knowledge or external information.\"\n\
- **Do NOT** perform an analysis of the **Contextual Information**\n\
in your answer.\n\
Your response **must** be in the following format:\n\
- First Provide step-by-step reasoning on how to answer the **Question**,\n\
potentially making use of the **Contextual Information**\n\
to refine your steps,\n\
do not directly mention **Contextual Information**.\n\
- Explain which parts of the **User Documentation**\n\
that are meaningful to answer the **Question** and explain why.\n\
- Copy paste the relevant sentences from the **User Documentation**\n\
in {BEGIN_QUOTE} and {END_QUOTE}.\n\
- Provide a summary of how you reached your answer."
    )
}

fn render_blocks(label: &str, blocks: &[&str]) -> String {
    let rendered: Vec<String> =
        blocks.iter().enumerate().map(|(i, text)| format!("[{label} {}]\n{text}", i + 1)).collect();
    rendered.join("\n\n")
}

/// The pieces of a rendered answer prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt<'a> {
    pub question: &'a str,
    pub docs: Vec<&'a str>,
    pub contexts: Vec<&'a str>,
}

/// Inverse of [`render_answer_prompt`]. Returns `None` for text that does
/// not follow the template.
pub fn parse_answer_prompt(prompt: &str) -> Option<ParsedPrompt<'_>> {
    let docs_section = between(prompt, DOCS_OPEN, DOCS_CLOSE)?;
    let ctx_section = between(prompt, CTX_OPEN, CTX_CLOSE)?;
    let question = between(prompt, QUESTION_OPEN, QUESTION_CLOSE)?;
    Some(ParsedPrompt {
        question,
        docs: parse_blocks(DOC_LABEL, docs_section),
        contexts: parse_blocks(CTX_LABEL, ctx_section),
    })
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let len = text[start..].find(close)?;
    Some(&text[start..start + len])
}

fn is_header(line: &str, label: &str, ordinal: usize) -> bool {
    line.strip_prefix('[')
        .and_then(|l| l.strip_prefix(label))
        .and_then(|l| l.strip_prefix(' '))
        .and_then(|l| l.strip_suffix(']'))
        .and_then(|n| n.parse::<usize>().ok())
        == Some(ordinal)
}

fn parse_blocks<'a>(label: &str, section: &'a str) -> Vec<&'a str> {
    let mut blocks = Vec::new();
    if section.is_empty() {
        return blocks;
    }
    // Header offsets, matched in ascending ordinal order.
    let mut headers: Vec<(usize, usize)> = Vec::new();
    let mut offset = 0;
    for line in section.split_inclusive('\n') {
        let bare = line.trim_end_matches('\n');
        if is_header(bare, label, headers.len() + 1) {
            headers.push((offset, offset + line.len()));
        }
        offset += line.len();
    }
    for (i, &(_, body_start)) in headers.iter().enumerate() {
        let body_end = match headers.get(i + 1) {
            // Blocks are separated by one blank line.
            Some(&(next, _)) => next.saturating_sub(2).max(body_start),
            None => section.len(),
        };
        blocks.push(&section[body_start..body_end]);
    }
    blocks
}
