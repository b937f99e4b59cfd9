//! Section and annex reference extraction, and resolution of references to
//! standards passages.
//!
//! Recognized forms, tried in this order at every position:
//!
//! | form      | example            | path       |
//! |-----------|--------------------|------------|
//! | see-paren | `(see 6.2.4.13)`   | `6.2.4.13` |
//! | annex     | `Annex A`, `annex D.2` | `A`, `D.2` |
//! | clause    | `clause 7.2`       | `7.2`      |
//! | bare      | `7.2.4.5` (two or more dots) | `7.2.4.5` |
//!
//! The see-paren form needs at least one dot; annex letters must be
//! uppercase so that "annex a" (article) is not a match.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::chunk::{Chunk, CorpusKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Section,
    Annex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub raw: String,
    pub kind: ReferenceKind,
    pub path: String,
}

/// Scans `text` for references, returning non-overlapping matches in
/// document order, de-duplicated by (kind, path).
pub fn extract_references(text: &str) -> Vec<Reference> {
    let mut out: Vec<Reference> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut i = 0;
    while i < text.len() {
        if !text.is_char_boundary(i) {
            i += 1;
            continue;
        }
        let found = match_see(text, i)
            .or_else(|| match_annex(text, i))
            .or_else(|| match_clause(text, i))
            .or_else(|| match_bare(text, i));
        match found {
            Some((end, reference)) => {
                if seen.insert((reference.kind, reference.path.clone())) {
                    out.push(reference);
                }
                i = end;
            }
            None => i += text[i..].chars().next().map_or(1, char::len_utf8),
        }
    }
    out
}

fn prev_char(text: &str, i: usize) -> Option<char> {
    text[..i].chars().next_back()
}

fn next_char(text: &str, i: usize) -> Option<char> {
    text[i..].chars().next()
}

fn word_start(text: &str, i: usize) -> bool {
    !prev_char(text, i).is_some_and(char::is_alphanumeric)
}

fn starts_with_ci(text: &str, i: usize, word: &str) -> bool {
    text.get(i..i + word.len()).is_some_and(|s| s.eq_ignore_ascii_case(word))
}

fn skip_ws(text: &str, mut i: usize) -> usize {
    while let Some(c) = next_char(text, i) {
        if c == ' ' || c == '\t' || c == '\u{a0}' {
            i += c.len_utf8();
        } else {
            break;
        }
    }
    i
}

/// `digits ('.' digits)*` starting at `i`. Returns (end, dot count). A
/// trailing dot not followed by a digit is not consumed.
fn match_number(text: &str, i: usize) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut j = i;
    let mut dots = 0;
    let digits = |mut k: usize| {
        let start = k;
        while k < bytes.len() && bytes[k].is_ascii_digit() {
            k += 1;
        }
        (k > start).then_some(k)
    };
    j = digits(j)?;
    while j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
        j = digits(j + 1)?;
        dots += 1;
    }
    Some((j, dots))
}

fn ends_cleanly(text: &str, end: usize) -> bool {
    !next_char(text, end).is_some_and(char::is_alphanumeric)
}

fn match_see(text: &str, i: usize) -> Option<(usize, Reference)> {
    if !text[i..].starts_with('(') {
        return None;
    }
    let mut j = skip_ws(text, i + 1);
    if !starts_with_ci(text, j, "see") {
        return None;
    }
    j += 3;
    let after = skip_ws(text, j);
    if after == j {
        return None;
    }
    j = after;
    if starts_with_ci(text, j, "also") {
        j = skip_ws(text, j + 4);
    }
    let (num_end, dots) = match_number(text, j)?;
    if dots < 1 || !ends_cleanly(text, num_end) {
        return None;
    }
    let path = text[j..num_end].to_string();
    let close = skip_ws(text, num_end);
    let end = if text[close..].starts_with(')') { close + 1 } else { num_end };
    Some((end, Reference { raw: text[i..end].to_string(), kind: ReferenceKind::Section, path }))
}

fn match_annex(text: &str, i: usize) -> Option<(usize, Reference)> {
    if !word_start(text, i) || !starts_with_ci(text, i, "annex") {
        return None;
    }
    let j = skip_ws(text, i + 5);
    if j == i + 5 {
        return None;
    }
    let letter = next_char(text, j).filter(char::is_ascii_uppercase)?;
    let mut end = j + 1;
    let mut path = String::from(letter);
    let bytes = text.as_bytes();
    if end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit() {
        let (num_end, _) = match_number(text, end + 1)?;
        path.push_str(&text[end..num_end]);
        end = num_end;
    }
    if !ends_cleanly(text, end) {
        return None;
    }
    Some((end, Reference { raw: text[i..end].to_string(), kind: ReferenceKind::Annex, path }))
}

fn match_clause(text: &str, i: usize) -> Option<(usize, Reference)> {
    if !word_start(text, i) || !starts_with_ci(text, i, "clause") {
        return None;
    }
    let j = skip_ws(text, i + 6);
    if j == i + 6 {
        return None;
    }
    let (end, _) = match_number(text, j)?;
    if !ends_cleanly(text, end) {
        return None;
    }
    Some((
        end,
        Reference { raw: text[i..end].to_string(), kind: ReferenceKind::Section, path: text[j..end].to_string() },
    ))
}

fn match_bare(text: &str, i: usize) -> Option<(usize, Reference)> {
    if !next_char(text, i).is_some_and(|c| c.is_ascii_digit()) {
        return None;
    }
    if prev_char(text, i).is_some_and(|c| c.is_alphanumeric() || c == '.') {
        return None;
    }
    let (end, dots) = match_number(text, i)?;
    if dots < 2 || !ends_cleanly(text, end) {
        return None;
    }
    let path = text[i..end].to_string();
    Some((end, Reference { raw: path.clone(), kind: ReferenceKind::Section, path }))
}

/// Standards passages indexed by the section/annex paths they introduce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefMap {
    pub entries: BTreeMap<String, Vec<String>>,
    pub passages: BTreeMap<String, String>,
}

impl RefMap {
    pub fn lookup(&self, path: &str) -> &[String] {
        self.entries.get(path).map_or(&[], Vec::as_slice)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Paths a chunk introduces: line-initial numbered headings, line-initial
/// annex headings, and any "Annex X" / "clause X.Y" occurrence.
pub fn heading_paths(text: &str) -> Vec<String> {
    let mut paths = Vec::new();
    for line in text.lines() {
        let line = line.trim_start();
        if let Some((end, _)) = match_number(line, 0) {
            let rest = line[end..].strip_prefix('.').unwrap_or(&line[end..]);
            let mut chars = rest.chars();
            let spaced = chars.next().is_some_and(char::is_whitespace);
            let titled = rest.trim_start().chars().next().is_some_and(char::is_alphabetic);
            if spaced && titled {
                paths.push(line[..end].to_string());
            }
        }
    }
    let mut i = 0;
    while i < text.len() {
        if text.is_char_boundary(i) {
            if let Some((end, r)) = match_annex(text, i).or_else(|| match_clause(text, i)) {
                paths.push(r.path);
                i = end;
                continue;
            }
        }
        i += 1;
    }
    paths
}

/// Builds the path → chunk map over standards chunks.
pub fn build_reference_map(context_chunks: &[Chunk]) -> Result<RefMap> {
    let mut map = RefMap::default();
    for chunk in context_chunks {
        if chunk.corpus_kind != CorpusKind::Context {
            return Err(Error::Invalid(format!("chunk `{}` is not a context chunk", chunk.id)));
        }
        let mut added = false;
        for path in heading_paths(&chunk.text) {
            let ids = map.entries.entry(path).or_default();
            if !ids.contains(&chunk.id) {
                ids.push(chunk.id.clone());
                added = true;
            }
        }
        if added {
            map.passages.insert(chunk.id.clone(), chunk.text.clone());
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub path: String,
    pub chunk_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub passages: Vec<Passage>,
    pub unresolved: Vec<Reference>,
}

/// Resolves references to verbatim standards passages in reference order.
/// A chunk reached through several references is returned once.
pub fn resolve(references: &[Reference], refmap: &RefMap) -> Resolution {
    let mut out = Resolution::default();
    let mut used = BTreeSet::new();
    for reference in references {
        let ids = refmap.lookup(&reference.path);
        let mut any = false;
        for id in ids {
            if let Some(text) = refmap.passages.get(id) {
                any = true;
                if used.insert(id.clone()) {
                    out.passages.push(Passage {
                        path: reference.path.clone(),
                        chunk_id: id.clone(),
                        text: text.clone(),
                    });
                }
            }
        }
        if !any {
            out.unresolved.push(reference.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::STANDARDS_PROJECT_ID;
    use alloc::vec;

    fn paths(text: &str) -> Vec<(ReferenceKind, String)> {
        extract_references(text).into_iter().map(|r| (r.kind, r.path)).collect()
    }

    fn ctx(id: &str, text: &str) -> Chunk {
        Chunk {
            id: id.into(),
            corpus_kind: CorpusKind::Context,
            project_id: STANDARDS_PROJECT_ID.into(),
            source_doc: "std".into(),
            seq: 0,
            text: text.into(),
            approx_tokens: 1,
        }
    }

    #[test]
    fn see_reference() {
        let refs = extract_references("…a Verification Report (see 6.2.4.13)");
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].raw, "(see 6.2.4.13)");
        assert_eq!(refs[0].path, "6.2.4.13");
        assert_eq!(refs[0].kind, ReferenceKind::Section);
    }

    #[test]
    fn no_references() {
        assert!(extract_references("plain text with no references").is_empty());
    }

    #[test]
    fn mixed_section_and_annex() {
        assert_eq!(
            paths("see 7.2.4.5 and Annex A"),
            [(ReferenceKind::Section, "7.2.4.5".into()), (ReferenceKind::Annex, "A".into())]
        );
    }

    #[test]
    fn dedupes_by_path() {
        assert_eq!(paths("(see 6.2.4) and again 6.2.4. Also Annex B, annex B").len(), 2);
    }

    #[test]
    fn sentence_final_dot_not_consumed() {
        assert_eq!(paths("as in clause 5.3."), [(ReferenceKind::Section, "5.3".into())]);
        assert_eq!(paths("given in Annex C."), [(ReferenceKind::Annex, "C".into())]);
    }

    #[test]
    fn idempotent_on_reserialized_output() {
        let text = "(see 6.2.4.13), Annex D.2, clause 7, 1.2.3";
        let first = extract_references(text);
        let joined: Vec<&str> = first.iter().map(|r| r.raw.as_str()).collect();
        let second = extract_references(&joined.join(" "));
        assert_eq!(first, second);
    }

    #[test]
    fn reference_map_from_headings() {
        let chunks = vec![
            ctx("c1", "6.2.4.13 Verification Report\nThe report shall ..."),
            ctx("c2", "Some text.\n7.1 Lifecycle\nAnnex A lists techniques"),
            ctx("c3", "No headings 3 mm here."),
        ];
        let map = build_reference_map(&chunks).unwrap();
        assert_eq!(map.lookup("6.2.4.13"), ["c1"]);
        assert_eq!(map.lookup("7.1"), ["c2"]);
        assert_eq!(map.lookup("A"), ["c2"]);
        assert!(map.lookup("9.9.9").is_empty());
        assert!(!map.passages.contains_key("c3"));
    }

    #[test]
    fn five_heading_fixture() {
        let text = "5 Organisation\nintro\n5.1 Roles\nx\n5.1.1 Designer\ny\n5.2 Independence\nz\n\
                    5.3 Competence\nbody with 2.5 values and 10 items";
        let map = build_reference_map(&[ctx("c", text)]).unwrap();
        let got: Vec<&str> = map.paths().collect();
        assert_eq!(got, ["5", "5.1", "5.1.1", "5.2", "5.3"]);
    }

    #[test]
    fn document_chunk_rejected() {
        let mut c = ctx("d", "1.1 Title");
        c.corpus_kind = CorpusKind::Document;
        assert!(build_reference_map(&[c]).is_err());
    }

    #[test]
    fn resolve_fans_out_and_flags_unresolved() {
        let chunks = vec![
            ctx("c1", "6.2.4.13 Verification Report\npart one"),
            ctx("c2", "6.2.4.13 Verification Report (continued)\npart two"),
        ];
        let map = build_reference_map(&chunks).unwrap();
        assert_eq!(resolve(&[], &map), Resolution::default());

        let refs = extract_references("(see 6.2.4.13) and 9.9.9");
        let res = resolve(&refs, &map);
        assert_eq!(res.passages.len(), 2);
        assert!(res.passages.iter().all(|p| chunks.iter().any(|c| c.text == p.text)));
        assert_eq!(res.unresolved.len(), 1);
        assert_eq!(res.unresolved[0].path, "9.9.9");
    }
}
