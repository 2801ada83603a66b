//! Evaluation arithmetic over externally produced embeddings and labels:
//! cross-modal retrieval recall, visual perceptibility (mean paired cosine),
//! semantic proximity (classification accuracy) and emotion confusion.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cosine, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("k={k} out of range [1, {m}]")]
    KOutOfRange { k: usize, m: usize },
    #[error("similarity matrix has {got} values, expected {n}x{m}")]
    BadShape { n: usize, m: usize, got: usize },
    #[error("ground truth for query {query} is {index}, but there are only {m} candidates")]
    GroundTruthOutOfRange { query: usize, index: usize, m: usize },
    #[error("ground truth has {got} entries for {n} queries")]
    GroundTruthLength { n: usize, got: usize },
    #[error("non-finite similarity at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch at pair {index}: {a} vs {b}")]
    DimensionMismatch { index: usize, a: usize, b: usize },
    #[error("zero vector at pair {index}")]
    ZeroVector { index: usize },
    #[error("unknown emotion label {0:?}")]
    UnknownLabel(String),
}

/// Query × candidate scores with the correct candidate per query.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    n: usize,
    m: usize,
    values: Vec<T>,
    ground_truth: Vec<usize>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn new(n: usize, m: usize, values: Vec<T>, ground_truth: Vec<usize>) -> Result<Self, MetricsError> {
        if n == 0 || m == 0 {
            return Err(MetricsError::Empty);
        }
        if values.len() != n * m {
            return Err(MetricsError::BadShape { n, m, got: values.len() });
        }
        if ground_truth.len() != n {
            return Err(MetricsError::GroundTruthLength { n, got: ground_truth.len() });
        }
        if let Some((query, &index)) = ground_truth.iter().enumerate().find(|(_, &g)| g >= m) {
            return Err(MetricsError::GroundTruthOutOfRange { query, index, m });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite { row: i / m, col: i % m });
        }
        Ok(Self { n, m, values, ground_truth })
    }

    /// Square matrix whose ground truth is the diagonal.
    pub fn with_diagonal_truth(n: usize, values: Vec<T>) -> Result<Self, MetricsError> {
        Self::new(n, n, values, (0..n).collect())
    }

    /// Cosine similarities between aligned query and candidate vectors; query `i`
    /// matches candidate `i`.
    pub fn from_paired_embeddings(queries: &[Vec<T>], candidates: &[Vec<T>]) -> Result<Self, MetricsError> {
        if queries.len() != candidates.len() {
            return Err(MetricsError::LengthMismatch(queries.len(), candidates.len()));
        }
        let n = queries.len();
        let dim = queries.first().map_or(0, Vec::len);
        for (index, v) in queries.iter().chain(candidates).enumerate() {
            if v.len() != dim {
                return Err(MetricsError::DimensionMismatch { index: index % n.max(1), a: dim, b: v.len() });
            }
            if crate::scalar::norm(v) == T::zero() {
                return Err(MetricsError::ZeroVector { index: index % n.max(1) });
            }
        }
        let mut values = Vec::with_capacity(n * n);
        for q in queries {
            for c in candidates {
                values.push(cosine(q, c).expect("zero vectors rejected above"));
            }
        }
        Self::with_diagonal_truth(n, values)
    }

    pub fn queries(&self) -> usize {
        self.n
    }

    pub fn candidates(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn ground_truth(&self) -> &[usize] {
        &self.ground_truth
    }

    /// The reverse retrieval direction. Only defined when the ground truth is a
    /// bijection (square and a permutation).
    pub fn transpose(&self) -> Option<Self> {
        if self.n != self.m {
            return None;
        }
        let mut inverse = vec![usize::MAX; self.m];
        for (q, &g) in self.ground_truth.iter().enumerate() {
            if inverse[g] != usize::MAX {
                return None;
            }
            inverse[g] = q;
        }
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.m {
            for i in 0..self.n {
                values.push(self.values[i * self.m + j]);
            }
        }
        Some(Self { n: self.m, m: self.n, values, ground_truth: inverse })
    }

    /// Zero-based rank of the ground-truth candidate for query `i`: the number of
    /// candidates scoring strictly higher, plus equal-scoring candidates with a
    /// lower index.
    pub fn rank_of_truth(&self, i: usize) -> usize {
        let row = self.row(i);
        let g = self.ground_truth[i];
        let target = row[g];
        row.iter()
            .enumerate()
            .filter(|&(j, &v)| v > target || (v == target && j < g))
            .count()
    }
}

pub fn recall_at_k<T: Scalar>(s: &SimilarityMatrix<T>, k: usize) -> Result<f64, MetricsError> {
    if k == 0 || k > s.m {
        return Err(MetricsError::KOutOfRange { k, m: s.m });
    }
    let hits = (0..s.n).filter(|&i| s.rank_of_truth(i) < k).count();
    Ok(hits as f64 / s.n as f64)
}

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    /// Requested k → recall fraction in `[0, 1]`.
    pub r_at: BTreeMap<usize, f64>,
    pub mean_recall: f64,
    /// True when there were fewer than 10 candidates and k was clamped.
    pub k_clamped: bool,
    pub queries: usize,
    pub candidates: usize,
}

impl RetrievalReport {
    pub fn r1(&self) -> f64 {
        self.r_at[&1]
    }
    pub fn r5(&self) -> f64 {
        self.r_at[&5]
    }
    pub fn r10(&self) -> f64 {
        self.r_at[&10]
    }
}

/// Recall at 1, 5 and 10 and their arithmetic mean. With fewer than 10
/// candidates, k is clamped to the candidate count and the report is flagged.
pub fn mean_recall<T: Scalar>(s: &SimilarityMatrix<T>) -> RetrievalReport {
    let mut r_at = BTreeMap::new();
    let mut k_clamped = false;
    for k in RECALL_KS {
        let eff = k.min(s.m);
        k_clamped |= eff != k;
        r_at.insert(k, recall_at_k(s, eff).expect("clamped k is in range"));
    }
    let mean_recall = (r_at[&1] + r_at[&5] + r_at[&10]) / 3.0;
    RetrievalReport { r_at, mean_recall, k_clamped, queries: s.n, candidates: s.m }
}

/// Mean cosine similarity over aligned (text, image) embedding pairs.
pub fn visual_perceptibility<T: Scalar>(text_vecs: &[Vec<T>], image_vecs: &[Vec<T>]) -> Result<T, MetricsError> {
    if text_vecs.len() != image_vecs.len() {
        return Err(MetricsError::LengthMismatch(text_vecs.len(), image_vecs.len()));
    }
    if text_vecs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = T::zero();
    for (index, (a, b)) in text_vecs.iter().zip(image_vecs).enumerate() {
        if a.len() != b.len() {
            return Err(MetricsError::DimensionMismatch { index, a: a.len(), b: b.len() });
        }
        sum = sum + cosine(a, b).ok_or(MetricsError::ZeroVector { index })?;
    }
    Ok(sum / T::of_usize(text_vecs.len()))
}

/// The six basic emotion classes of the tweet emotion benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Sadness,
    Joy,
    Love,
    Anger,
    Fear,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Sadness,
        Emotion::Joy,
        Emotion::Love,
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Sadness => "sadness",
            Emotion::Joy => "joy",
            Emotion::Love => "love",
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Surprise => "surprise",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| MetricsError::UnknownLabel(s.to_string()))
    }
}

pub fn parse_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<Emotion>, MetricsError> {
    labels.iter().map(|l| l.as_ref().parse()).collect()
}

fn check_pairs(predictions: &[Emotion], gold: &[Emotion]) -> Result<(), MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), gold.len()));
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Classification accuracy of predictions against gold labels.
pub fn semantic_proximity(predictions: &[Emotion], gold: &[Emotion]) -> Result<f64, MetricsError> {
    check_pairs(predictions, gold)?;
    let correct = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEval {
    pub labels: Vec<Emotion>,
    /// Raw counts, `counts[gold][predicted]`.
    pub counts: [[usize; 6]; 6],
    /// Row-normalized counts; rows of absent gold classes are all zero.
    pub confusion: [[f64; 6]; 6],
    pub accuracy: f64,
}

impl EmotionEval {
    pub fn rate(&self, gold: Emotion, predicted: Emotion) -> f64 {
        self.confusion[gold.index()][predicted.index()]
    }
}

pub fn confusion(predictions: &[Emotion], gold: &[Emotion]) -> Result<EmotionEval, MetricsError> {
    check_pairs(predictions, gold)?;
    let mut counts = [[0usize; 6]; 6];
    for (p, g) in predictions.iter().zip(gold) {
        counts[g.index()][p.index()] += 1;
    }
    let mut matrix = [[0.0f64; 6]; 6];
    for (row, out) in counts.iter().zip(matrix.iter_mut()) {
        let total: usize = row.iter().sum();
        if total > 0 {
            for (c, o) in row.iter().zip(out.iter_mut()) {
                *o = *c as f64 / total as f64;
            }
        }
    }
    let trace: usize = (0..6).map(|i| counts[i][i]).sum();
    Ok(EmotionEval {
        labels: Emotion::ALL.to_vec(),
        counts,
        confusion: matrix,
        accuracy: trace as f64 / gold.len() as f64,
    })
}
