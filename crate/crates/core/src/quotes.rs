//! Quote-marker extraction, verbatim validation and source attribution.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::prompt::{BEGIN_QUOTE, END_QUOTE};
use crate::text::normalize_ws;

/// Marker-delimited spans found in an answer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuoteScan {
    pub spans: Vec<String>,
    /// A begin marker without a matching end marker.
    pub unterminated: bool,
    /// An end marker with no open quote.
    pub stray_end: bool,
}

pub fn scan_quotes(answer: &str) -> QuoteScan {
    let mut scan = QuoteScan::default();
    let mut rest = answer;
    loop {
        let begin = rest.find(BEGIN_QUOTE);
        let end = rest.find(END_QUOTE);
        match (begin, end) {
            (Some(b), e) if e.is_none_or(|e| b < e) => {
                let after = &rest[b + BEGIN_QUOTE.len()..];
                match after.find(END_QUOTE) {
                    Some(close) => {
                        let inner = &after[..close];
                        if inner.contains(BEGIN_QUOTE) {
                            scan.unterminated = true;
                        }
                        scan.spans.push(inner.trim().to_string());
                        rest = &after[close + END_QUOTE.len()..];
                    }
                    None => {
                        scan.unterminated = true;
                        break;
                    }
                }
            }
            (_, Some(e)) => {
                scan.stray_end = true;
                rest = &rest[e + END_QUOTE.len()..];
            }
            (None, None) => break,
            // (Some(b), None) is covered by the first arm.
            (Some(_), None) => unreachable!(),
        }
    }
    scan
}

/// Spans between quote markers, trimmed.
pub fn extract_quotes(answer: &str) -> Vec<String> {
    scan_quotes(answer).spans
}

/// Whether `span` occurs in `source` after whitespace normalization.
pub fn is_verbatim(span: &str, source: &str) -> bool {
    let span = normalize_ws(span);
    !span.is_empty() && normalize_ws(source).contains(&span)
}

/// Where a quoted span was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "chunk_id")]
pub enum QuoteSource {
    Chunk(String),
    Unmatched,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributedQuote {
    pub span: String,
    pub source: QuoteSource,
}

/// Matches every quoted span to the first source (in the given order) that
/// contains it verbatim; unmatched spans are kept and flagged.
pub fn attribute_quotes<'a, I>(answer: &str, sources: I) -> Vec<AttributedQuote>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let normalized: Vec<(&str, String)> = sources.into_iter().map(|(id, text)| (id, normalize_ws(text))).collect();
    extract_quotes(answer)
        .into_iter()
        .map(|span| {
            let needle = normalize_ws(&span);
            let source = normalized
                .iter()
                .find(|(_, text)| !needle.is_empty() && text.contains(&needle))
                .map(|(id, _)| QuoteSource::Chunk((*id).to_string()))
                .unwrap_or(QuoteSource::Unmatched);
            AttributedQuote { span, source }
        })
        .collect()
}

/// Fraction of quotes that could not be attributed; 0 when there are none.
pub fn unmatched_fraction(quotes: &[AttributedQuote]) -> f64 {
    if quotes.is_empty() {
        return 0.0;
    }
    let unmatched = quotes.iter().filter(|q| q.source == QuoteSource::Unmatched).count();
    unmatched as f64 / quotes.len() as f64
}
