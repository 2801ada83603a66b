//! Lexicon profanity scoring and the five-interval comparison report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("cannot read lexicon {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("{which} score {value} for pair {index} is outside [0, 1]")]
    ScoreOutOfRange {
        which: &'static str,
        index: usize,
        value: f64,
    },
}

/// Anything that maps text to an offensiveness score in `[0, 1]`.
pub trait ProfanityScore {
    fn score(&self, text: &str) -> f64;
}

/// Whole-token, case-insensitive lexicon matcher. A text scores the largest
/// weight among the terms it contains; multi-word terms match as contiguous
/// token runs.
#[derive(Debug, Clone, Default)]
pub struct LexiconScorer {
    terms: BTreeMap<Vec<String>, f64>,
}

impl LexiconScorer {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self, SafetyError> {
        let mut terms = BTreeMap::new();
        for (line, (term, weight)) in entries.into_iter().enumerate() {
            Self::insert(&mut terms, line + 1, term.as_ref(), weight)?;
        }
        Ok(Self { terms })
    }

    fn insert(
        terms: &mut BTreeMap<Vec<String>, f64>,
        line: usize,
        term: &str,
        weight: f64,
    ) -> Result<(), SafetyError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(SafetyError::Lexicon {
                line,
                message: format!("weight {weight} outside [0, 1]"),
            });
        }
        let toks: Vec<String> = text::tokens(term).collect();
        if toks.is_empty() {
            return Err(SafetyError::Lexicon {
                line,
                message: format!("term {term:?} has no word characters"),
            });
        }
        let slot = terms.entry(toks).or_insert(weight);
        *slot = slot.max(weight);
        Ok(())
    }

    /// Parse `term<TAB>weight` lines. Blank lines and `#` comments are skipped.
    pub fn parse_tsv(src: &str) -> Result<Self, SafetyError> {
        let mut terms = BTreeMap::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim_end_matches('\r');
            if l.trim().is_empty() || l.trim_start().starts_with('#') {
                continue;
            }
            let (term, weight) = l.split_once('\t').ok_or_else(|| SafetyError::Lexicon {
                line,
                message: "expected term<TAB>weight".into(),
            })?;
            let weight: f64 = weight.trim().parse().map_err(|e| SafetyError::Lexicon {
                line,
                message: format!("bad weight: {e}"),
            })?;
            Self::insert(&mut terms, line, term, weight)?;
        }
        Ok(Self { terms })
    }

    pub fn load(path: &Path) -> Result<Self, SafetyError> {
        let src = std::fs::read_to_string(path).map_err(|source| SafetyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_tsv(&src)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms (as token runs) found in `text`, with their weights.
    pub fn matches(&self, text: &str) -> Vec<(String, f64)> {
        let toks: Vec<String> = text::tokens(text).collect();
        self.terms
            .iter()
            .filter(|(term, _)| toks.windows(term.len()).any(|w| w == term.as_slice()))
            .map(|(term, &w)| (term.join(" "), w))
            .collect()
    }
}

impl ProfanityScore for LexiconScorer {
    fn score(&self, text: &str) -> f64 {
        self.matches(text).into_iter().map(|(_, w)| w).fold(0.0, f64::max)
    }
}

/// One source/target comparison, e.g. a lyric and a system's elaboration of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub source: f64,
    pub target: f64,
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBin {
    pub count: usize,
    pub mean_source: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfanityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Absent when the bin is empty.
    pub mean_source: Option<f64>,
    pub systems: BTreeMap<String, SystemBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfanityReport {
    pub edges: Vec<f64>,
    pub bins: Vec<ProfanityBin>,
}

pub const N_BINS: usize = 5;

/// Bin edges `0, 0.2, …, 1.0`.
pub fn bin_edges() -> Vec<f64> {
    (0..=N_BINS).map(|i| i as f64 / N_BINS as f64).collect()
}

/// Bins are half-open `[lo, hi)` except the last, which includes 1.0.
pub fn bin_index(score: f64, edges: &[f64]) -> usize {
    edges[1..edges.len() - 1].iter().filter(|&&e| score >= e).count()
}

pub fn bin_report(pairs: &[ScoredPair]) -> Result<ProfanityReport, SafetyError> {
    for (index, p) in pairs.iter().enumerate() {
        for (which, value) in [("source", p.source), ("target", p.target)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SafetyError::ScoreOutOfRange { which, index, value });
            }
        }
    }
    let edges = bin_edges();
    #[derive(Default)]
    struct Acc {
        n: usize,
        src: f64,
        tgt: f64,
    }
    let mut totals: Vec<Acc> = (0..N_BINS).map(|_| Acc::default()).collect();
    let mut per_system: Vec<BTreeMap<&str, Acc>> = (0..N_BINS).map(|_| BTreeMap::new()).collect();
    for p in pairs {
        let b = bin_index(p.source, &edges);
        totals[b].n += 1;
        totals[b].src += p.source;
        let acc = per_system[b].entry(p.system.as_str()).or_default();
        acc.n += 1;
        acc.src += p.source;
        acc.tgt += p.target;
    }
    let bins = (0..N_BINS)
        .map(|b| ProfanityBin {
            lower: edges[b],
            upper: edges[b + 1],
            count: totals[b].n,
            mean_source: (totals[b].n > 0).then(|| totals[b].src / totals[b].n as f64),
            systems: per_system[b]
                .iter()
                .map(|(name, a)| {
                    (
                        name.to_string(),
                        SystemBin {
                            count: a.n,
                            mean_source: a.src / a.n as f64,
                            mean_target: a.tgt / a.n as f64,
                        },
                    )
                })
                .collect(),
        })
        .collect();
    Ok(ProfanityReport { edges, bins })
}

/// Score text pairs with `scorer` and bin them.
pub fn score_pairs<S: ProfanityScore + ?Sized>(
    scorer: &S,
    texts: &[(String, String, String)],
) -> Vec<ScoredPair> {
    texts
        .iter()
        .map(|(source, target, system)| ScoredPair {
            source: scorer.score(source),
            target: scorer.score(target),
            system: system.clone(),
        })
        .collect()
}
