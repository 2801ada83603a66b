//! Deterministic stand-in text embedder.
//!
//! Each text is hashed with SHA-256; the digest seeds a ChaCha stream from
//! which a Gaussian vector is drawn and normalized. The mapping is stable
//! across platforms and releases, so metric and interpolation paths can be
//! exercised without an external model. It carries no semantics.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::geometry::EmbeddingMatrix;
use crate::scalar::Scalar;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl StubEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "embedding dimension must be >= 1");
        Self { dim, seed }
    }

    fn rng_for(&self, domain: &str, text: &str) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(domain.as_bytes());
        h.update([0]);
        h.update(text.as_bytes());
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    fn unit<T: Scalar>(&self, mut rng: ChaCha20Rng) -> Vec<T> {
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                return v.into_iter().map(|x| T::of(x / n)).collect();
            }
        }
    }

    /// Unit vector for a whole text.
    pub fn embed<T: Scalar>(&self, text: &str) -> Vec<T> {
        self.unit(self.rng_for("text", text))
    }

    /// Token-position grid of `rows` unit rows: one row per word, padded with
    /// a fixed padding vector. Mirrors the shape of a text encoder's hidden states.
    pub fn embed_tokens<T: Scalar>(&self, text: &str, rows: usize) -> EmbeddingMatrix<T> {
        let words: Vec<String> = text::tokens(text).collect();
        let mut data = Vec::with_capacity(rows * self.dim);
        for r in 0..rows {
            let v: Vec<T> = match words.get(r) {
                Some(w) => self.unit(self.rng_for("token", w)),
                None => self.unit(self.rng_for("pad", &r.to_string())),
            };
            data.extend(v);
        }
        EmbeddingMatrix::new(rows, self.dim, data).expect("stub rows are finite and nonempty")
    }
}
