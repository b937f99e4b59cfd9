//! Files for the blind evaluation: response maps, blind items, the
//! separate key file, and the ratings CSV.

use std::collections::BTreeMap;
use std::path::Path;

use ragft_core::eval::{build_blind_set, summarize, BlindItem, BlindKey, EvalReport, Label, Rating};
use serde::Deserialize;

use crate::error::{AppError, AppResult};
use crate::io;

/// Reads a JSON object mapping question id to answer text.
pub fn read_responses(path: &Path) -> AppResult<BTreeMap<String, String>> {
    io::read_json(path)
}

/// Writes the rater-facing items and the key to different files.
pub fn write_blind_set(
    responses_1: &Path,
    responses_2: &Path,
    names: (&str, &str),
    seed: u64,
    items_out: &Path,
    key_out: &Path,
    force: bool,
) -> AppResult<Vec<BlindItem>> {
    if items_out == key_out {
        return Err(AppError::Config("items and key must be written to different files".into()));
    }
    io::ensure_writable(items_out, force)?;
    io::ensure_writable(key_out, force)?;
    let r1 = read_responses(responses_1)?;
    let r2 = read_responses(responses_2)?;
    let (items, key) = build_blind_set(&r1, &r2, names.0, names.1, seed)?;
    io::write_json(items_out, &items)?;
    io::write_json(key_out, &key)?;
    Ok(items)
}

#[derive(Deserialize)]
struct RatingRow {
    item_id: String,
    label: String,
    score: i64,
    rater: String,
}

/// Reads `item_id,label,score,rater` rows. Errors name the data row (1-based).
pub fn read_ratings(path: &Path) -> AppResult<Vec<Rating>> {
    let bad = |message: String| AppError::Format { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<RatingRow>().enumerate() {
        let row = row.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        let label = Label::parse(&row.label)
            .ok_or_else(|| bad(format!("row {}: label `{}` is not A or B", i + 1, row.label)))?;
        let score = u8::try_from(row.score)
            .ok()
            .filter(|s| *s <= ragft_core::eval::MAX_SCORE)
            .ok_or_else(|| bad(format!("row {}: score {} outside 0..=10", i + 1, row.score)))?;
        out.push(Rating { item_id: row.item_id, label, score, rater: row.rater });
    }
    Ok(out)
}

pub fn report(ratings_path: &Path, key_path: &Path) -> AppResult<EvalReport> {
    io::require(key_path, "eval-blind")?;
    let key: BlindKey = io::read_json(key_path)?;
    let ratings = read_ratings(ratings_path)?;
    Ok(summarize(&ratings, &key)?)
}
