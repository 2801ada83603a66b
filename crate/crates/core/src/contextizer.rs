//! Context windows and loss-masked training records.
//!
//! A record's full sequence is `prefix + SEPARATOR + target + END_MARKER`,
//! where the prefix is the window's lines joined by `\n`, oldest first. The
//! loss span is a half-open character interval (Unicode scalar values, not
//! bytes) covering `target + END_MARKER` and nothing else.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Song;

pub const SEPARATOR: &str = "\n<ELAB>\n";
pub const END_MARKER: &str = "\n<|end|>";

/// Context sizes used for the released dataset variants.
pub const STANDARD_CONTEXT_SIZES: [usize; 5] = [0, 1, 3, 5, 7];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("line index {index} out of range for {song} ({len} lines)")]
    IndexOutOfRange {
        song: String,
        index: usize,
        len: usize,
    },
    #[error("empty elaboration")]
    EmptyElaboration,
    #[error("{what} contains a reserved delimiter")]
    ReservedDelimiter { what: String },
    #[error("no elaboration for {song}#{index}")]
    MissingElaboration { song: String, index: usize },
    #[error("duplicate elaboration for {song}#{index}")]
    DuplicateElaboration { song: String, index: usize },
    #[error("elaboration for {song}#{index} was made for a different line text")]
    LineMismatch { song: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub artist: String,
    pub title: String,
    pub target_index: usize,
    pub context_size: usize,
    /// Included line texts, oldest first, target line last.
    pub lines: Vec<String>,
}

pub fn build_context(song: &Song, index: usize, context_size: usize) -> Result<ContextWindow, ContextError> {
    if index >= song.lines.len() {
        return Err(ContextError::IndexOutOfRange {
            song: song.label(),
            index,
            len: song.lines.len(),
        });
    }
    let first = index.saturating_sub(context_size);
    Ok(ContextWindow {
        artist: song.artist.clone(),
        title: song.title.clone(),
        target_index: index,
        context_size,
        lines: song.lines[first..=index].iter().map(|l| l.text.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub prefix: String,
    pub target: String,
    pub loss_span: (usize, usize),
    pub song: String,
    pub artist: String,
    pub line_index: usize,
    pub context_size: usize,
}

impl TrainingRecord {
    pub fn full_sequence(&self) -> String {
        let mut s = String::with_capacity(
            self.prefix.len() + SEPARATOR.len() + self.target.len() + END_MARKER.len(),
        );
        s.push_str(&self.prefix);
        s.push_str(SEPARATOR);
        s.push_str(&self.target);
        s.push_str(END_MARKER);
        s
    }

    /// Characters of the full sequence inside the loss span.
    pub fn loss_text(&self) -> String {
        let (start, end) = self.loss_span;
        self.full_sequence().chars().skip(start).take(end - start).collect()
    }

    /// Character length of the prefix region (prefix plus separator).
    pub fn prefix_chars(&self) -> usize {
        self.prefix.chars().count() + SEPARATOR.chars().count()
    }
}

pub fn contains_reserved_delimiter(s: &str) -> bool {
    s.contains(SEPARATOR) || s.contains(END_MARKER) || s.contains("<ELAB>") || s.contains("<|end|>")
}

pub fn serialize(window: &ContextWindow, elaboration: &str) -> Result<TrainingRecord, ContextError> {
    if elaboration.trim().is_empty() {
        return Err(ContextError::EmptyElaboration);
    }
    if contains_reserved_delimiter(elaboration) {
        return Err(ContextError::ReservedDelimiter {
            what: "elaboration".into(),
        });
    }
    if let Some(i) = window.lines.iter().position(|l| contains_reserved_delimiter(l)) {
        return Err(ContextError::ReservedDelimiter {
            what: format!("context line {i}"),
        });
    }
    let prefix = window.lines.join("\n");
    let start = prefix.chars().count() + SEPARATOR.chars().count();
    let end = start + elaboration.chars().count() + END_MARKER.chars().count();
    Ok(TrainingRecord {
        prefix,
        target: elaboration.to_string(),
        loss_span: (start, end),
        song: window.title.clone(),
        artist: window.artist.clone(),
        line_index: window.target_index,
        context_size: window.context_size,
    })
}

/// One elaboration keyed by song and line, as stored by the elaborator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredElaboration {
    pub artist: String,
    pub title: String,
    pub line_index: usize,
    pub line: String,
    pub elaboration: String,
}

type ElabKey = (String, String, usize);

fn index_elaborations(elabs: &[StoredElaboration]) -> Result<HashMap<ElabKey, &StoredElaboration>, ContextError> {
    let mut map = HashMap::with_capacity(elabs.len());
    for e in elabs {
        let key = (e.artist.clone(), e.title.clone(), e.line_index);
        if map.insert(key, e).is_some() {
            return Err(ContextError::DuplicateElaboration {
                song: format!("{} - {}", e.artist, e.title),
                index: e.line_index,
            });
        }
    }
    Ok(map)
}

/// One record per corpus line, ordered by `(artist, title, line_index)`.
///
/// Elaborations for lines absent from the corpus are ignored.
pub fn emit_dataset(
    corpus: &[Song],
    elaborations: &[StoredElaboration],
    context_size: usize,
) -> Result<Vec<TrainingRecord>, ContextError> {
    let by_key = index_elaborations(elaborations)?;
    let mut songs: Vec<&Song> = corpus.iter().collect();
    songs.sort_by(|a, b| a.key().cmp(&b.key()));

    let mut out = Vec::with_capacity(songs.iter().map(|s| s.lines.len()).sum());
    for song in songs {
        for line in &song.lines {
            let key = (song.artist.clone(), song.title.clone(), line.index);
            let elab = by_key.get(&key).ok_or_else(|| ContextError::MissingElaboration {
                song: song.label(),
                index: line.index,
            })?;
            if elab.line != line.text {
                return Err(ContextError::LineMismatch {
                    song: song.label(),
                    index: line.index,
                });
            }
            let window = build_context(song, line.index, context_size)?;
            out.push(serialize(&window, &elab.elaboration)?);
        }
    }
    Ok(out)
}
