//! Resumable, bounded-parallel elaboration of a whole corpus.
//!
//! The elaboration store doubles as the checkpoint. It is append-only, each
//! song's records are written with a single write in corpus order, and a
//! restart skips every song whose records are already complete.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChatClient, Elaborator, SongOutcome};
use crate::contextizer::StoredElaboration;
use crate::corpus::Song;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("elaboration store {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(
        "elaboration store {path} is corrupt at line {line}: {message}. \
         Remove that line and everything after it (or delete the file to start over), then rerun; \
         completed songs before it are kept"
    )]
    Corrupt { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardedSong {
    pub artist: String,
    pub title: String,
    pub reason: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub songs_total: usize,
    pub already_done: usize,
    pub elaborated: usize,
    pub discarded: Vec<DiscardedSong>,
    /// Songs that needed more than one request because of their length.
    pub chunked: Vec<String>,
    pub lines_written: usize,
}

/// Load a store, validating every record and the per-song completeness rule
/// against nothing but itself (indices must be `0..n` without gaps).
pub fn read_store(path: &Path) -> Result<Vec<StoredElaboration>, RunError> {
    let io_err = |source| RunError::Io { path: path.display().to_string(), source };
    let corrupt = |line, message: String| RunError::Corrupt { path: path.display().to_string(), line, message };
    if !path.exists() {
        return Ok(Vec::new());
    }
    let raw = std::fs::read_to_string(path).map_err(io_err)?;
    if !raw.is_empty() && !raw.ends_with('\n') {
        return Err(corrupt(raw.lines().count(), "truncated final record".into()));
    }
    let mut out: Vec<StoredElaboration> = Vec::new();
    let mut first_line_of: HashMap<(String, String), usize> = HashMap::new();
    for (i, l) in raw.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let rec: StoredElaboration = serde_json::from_str(l).map_err(|e| corrupt(i + 1, e.to_string()))?;
        let key = (rec.artist.clone(), rec.title.clone());
        let expected = match out.last() {
            Some(prev) if (prev.artist.as_str(), prev.title.as_str()) == (key.0.as_str(), key.1.as_str()) => {
                prev.line_index + 1
            }
            _ => {
                if first_line_of.contains_key(&key) {
                    return Err(corrupt(i + 1, format!("song {} - {} appears twice", key.0, key.1)));
                }
                0
            }
        };
        if rec.line_index != expected {
            return Err(corrupt(i + 1, format!("expected line_index {expected}, found {}", rec.line_index)));
        }
        first_line_of.entry(key).or_insert(i + 1);
        out.push(rec);
    }
    Ok(out)
}

fn records_for(song: &Song, texts: &[String]) -> Vec<StoredElaboration> {
    song.lines
        .iter()
        .zip(texts)
        .map(|(line, e)| StoredElaboration {
            artist: song.artist.clone(),
            title: song.title.clone(),
            line_index: line.index,
            line: line.text.clone(),
            elaboration: e.clone(),
        })
        .collect()
}

impl<C: ChatClient + ?Sized> Elaborator<'_, C> {
    /// Elaborate every song not yet in the store at `store_path`, appending
    /// results in corpus order.
    pub fn run_corpus(&self, songs: &[Song], store_path: &Path) -> Result<RunReport, RunError> {
        let existing = read_store(store_path)?;
        let mut done: HashMap<(&str, &str), Vec<&StoredElaboration>> = HashMap::new();
        for rec in &existing {
            done.entry((rec.artist.as_str(), rec.title.as_str())).or_default().push(rec);
        }
        let mut report = RunReport { songs_total: songs.len(), ..Default::default() };
        let mut todo = Vec::new();
        for song in songs {
            match done.get(&song.key()) {
                Some(recs) => {
                    let matches = recs.len() == song.lines.len()
                        && recs.iter().zip(&song.lines).all(|(r, l)| r.line == l.text);
                    if !matches {
                        return Err(RunError::Corrupt {
                            path: store_path.display().to_string(),
                            line: 0,
                            message: format!(
                                "stored records for {} do not match the corpus song ({} stored, {} lines)",
                                song.label(),
                                recs.len(),
                                song.lines.len()
                            ),
                        });
                    }
                    report.already_done += 1;
                }
                None if song.lines.is_empty() => report.discarded.push(DiscardedSong {
                    artist: song.artist.clone(),
                    title: song.title.clone(),
                    reason: "song has no lines".into(),
                    attempts: 0,
                }),
                None => todo.push(song),
            }
        }

        let io_err = |source| RunError::Io { path: store_path.display().to_string(), source };
        let mut store = OpenOptions::new().create(true).append(true).open(store_path).map_err(io_err)?;

        let next = AtomicUsize::new(0);
        let workers = self.policy().max_inflight.max(1).min(todo.len().max(1));
        let (tx, rx) = mpsc::channel::<(usize, SongOutcome)>();
        let todo_ref = &todo;
        let next_ref = &next;
        let write_result: Result<(), RunError> = std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                scope.spawn(move || loop {
                    let i = next_ref.fetch_add(1, Ordering::SeqCst);
                    let Some(song) = todo_ref.get(i) else { break };
                    let outcome = match self.elaborate_song(song) {
                        Ok(o) => o,
                        Err(e) => SongOutcome::Discarded { reason: e.to_string(), attempts: 0 },
                    };
                    if tx.send((i, outcome)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            // Single writer; outcomes are reordered so the store follows corpus order.
            let mut pending: BTreeMap<usize, SongOutcome> = BTreeMap::new();
            let mut cursor = 0;
            for (i, outcome) in rx {
                pending.insert(i, outcome);
                while let Some(outcome) = pending.remove(&cursor) {
                    let song = todo[cursor];
                    if self.policy().chunks(song.lines.len()).len() > 1 {
                        report.chunked.push(song.label());
                    }
                    match outcome {
                        SongOutcome::Elaborated(elabs) => {
                            let texts: Vec<String> = elabs.into_iter().map(|e| e.text).collect();
                            let mut buf = Vec::new();
                            for rec in records_for(song, &texts) {
                                serde_json::to_writer(&mut buf, &rec).expect("record serializes");
                                buf.push(b'\n');
                            }
                            store.write_all(&buf).and_then(|_| store.flush()).map_err(io_err)?;
                            report.elaborated += 1;
                            report.lines_written += texts.len();
                        }
                        SongOutcome::Discarded { reason, attempts } => {
                            log::warn!("discarded {}: {reason}", song.label());
                            report.discarded.push(DiscardedSong {
                                artist: song.artist.clone(),
                                title: song.title.clone(),
                                reason,
                                attempts,
                            });
                        }
                    }
                    cursor += 1;
                }
            }
            Ok(())
        });
        write_result?;
        Ok(report)
    }
}
