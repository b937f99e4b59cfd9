//! Resumable pairing over the training chunks.
//!
//! The journal is JSONL, one [`Pair`] per line, in chunk-store order. Work
//! proceeds in batches of `concurrency` chunks; each batch is appended and
//! fsynced before the next starts, so an interrupted run loses at most one
//! batch and a resumed run never re-queries a journaled chunk.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::thread;

use ragft_core::chunk::Chunk;
use ragft_core::pairing::{Pair, PairStatus, PairingContext};
use ragft_core::{ChatModel, Embedder, Reranker};
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::io::{self, JsonlAppender};

pub type DynPairingContext<'a> = PairingContext<'a, dyn Embedder + 'a, dyn Reranker + 'a, dyn ChatModel + 'a>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PairSummary {
    pub train_chunks: usize,
    pub resumed: usize,
    pub processed: usize,
    pub selected: usize,
    pub none: usize,
    pub failed: usize,
}

/// Reads the journal, dropping a torn final line left by an interrupted
/// write. A malformed line anywhere else is an error.
pub fn read_journal(path: &Path) -> AppResult<Vec<Pair>> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let lines: Vec<String> =
        BufReader::new(file).lines().collect::<Result<_, _>>().map_err(|e| AppError::io(path, e))?;
    let mut pairs = Vec::with_capacity(lines.len());
    let mut good_bytes = 0u64;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            good_bytes += line.len() as u64 + 1;
            continue;
        }
        match serde_json::from_str::<Pair>(line) {
            Ok(p) => {
                pairs.push(p);
                good_bytes += line.len() as u64 + 1;
            }
            Err(_) if i + 1 == lines.len() => {
                log::warn!("{}: dropping torn final line {}", path.display(), i + 1);
                let f = OpenOptions::new().write(true).open(path).map_err(|e| AppError::io(path, e))?;
                f.set_len(good_bytes).map_err(|e| AppError::io(path, e))?;
            }
            Err(source) => return Err(AppError::Parse { path: path.to_path_buf(), line: i + 1, source }),
        }
    }
    Ok(pairs)
}

pub fn build_pairs(
    train_chunks: &[Chunk],
    ctx: &DynPairingContext<'_>,
    journal: &Path,
    resume: bool,
    force: bool,
    concurrency: usize,
) -> AppResult<PairSummary> {
    let mut done = BTreeSet::new();
    if journal.exists() {
        if resume {
            for p in read_journal(journal)? {
                done.insert(p.chunk_id);
            }
        } else if force {
            fs::remove_file(journal).map_err(|e| AppError::io(journal, e))?;
        } else {
            return Err(AppError::Exists(journal.to_path_buf()));
        }
    }
    let mut summary = PairSummary { train_chunks: train_chunks.len(), ..Default::default() };
    let pending: Vec<&Chunk> = train_chunks.iter().filter(|c| !done.contains(&c.id)).collect();
    summary.resumed = train_chunks.len() - pending.len();
    let mut appender = JsonlAppender::open(journal)?;

    for batch in pending.chunks(concurrency.max(1)) {
        let pairs: Vec<Pair> = thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|c| s.spawn(move || ctx.pair_chunk(c))).collect();
            handles.into_iter().map(|h| h.join().expect("pairing worker panicked")).collect()
        });
        appender.append_all(&pairs)?;
        for p in &pairs {
            summary.processed += 1;
            match p.status {
                PairStatus::Selected => summary.selected += 1,
                PairStatus::NoMatch => summary.none += 1,
                PairStatus::Failed => summary.failed += 1,
            }
        }
        log::info!("paired {}/{}", summary.resumed + summary.processed, summary.train_chunks);
    }
    Ok(summary)
}

/// Journal contents restricted to the given train chunks, in their order.
pub fn load_pairs(path: &Path, train_chunks: &[Chunk]) -> AppResult<Vec<Pair>> {
    io::require(path, "pair")?;
    let mut by_chunk: std::collections::BTreeMap<String, Pair> =
        read_journal(path)?.into_iter().map(|p| (p.chunk_id.clone(), p)).collect();
    Ok(train_chunks.iter().filter_map(|c| by_chunk.remove(&c.id)).collect())
}
