//! Tooling for turning song lyrics into a visual-elaboration corpus.
//!
//! The crate covers the whole offline side of the pipeline: lyric ingestion
//! and filtering ([`corpus`]), teacher-LLM elaboration ([`elaborator`]),
//! loss-masked training records ([`contextizer`]), evaluation arithmetic
//! ([`metrics`], [`safety`]), embedding interpolation ([`geometry`]) and
//! music-video frame planning ([`timeline`]).
//!
//! Numerical modules are generic over [`Scalar`]; the aliases below fix the
//! common instantiations.

pub mod config;
pub mod contextizer;
pub mod corpus;
pub mod elaborator;
pub mod embed;
pub mod geometry;
pub mod jsonl;
pub mod matrix_io;
pub mod metrics;
pub mod pipeline;
pub mod safety;
pub mod scalar;
pub mod text;
pub mod timeline;

pub use scalar::Scalar;

/// Single-precision embedding grid, the on-disk representation.
pub type EmbeddingMatrix32 = geometry::EmbeddingMatrix<f32>;
/// Double-precision embedding grid.
pub type EmbeddingMatrix64 = geometry::EmbeddingMatrix<f64>;
pub type AlignmentResult32 = geometry::AlignmentResult<f32>;
pub type AlignmentResult64 = geometry::AlignmentResult<f64>;
pub type SimilarityMatrix32 = metrics::SimilarityMatrix<f32>;
pub type SimilarityMatrix64 = metrics::SimilarityMatrix<f64>;
