//! Spherical interpolation between token-embedding grids.
//!
//! Before interpolating from `p0` to `p1`, the rows of `p1` can be cyclically
//! rotated so that, chunk by chunk, they point the same way as the rows of
//! `p0` (chunked similarity alignment). Each row is then interpolated along
//! its great circle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cosine, norm, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("matrix shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("matrix data has {got} values, expected {rows}x{dim}")]
    BadLength { rows: usize, dim: usize, got: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("zero row {row} in {which}")]
    ZeroRow { which: &'static str, row: usize },
    #[error("vectors are antipodal; slerp is undefined")]
    Antipodal,
    #[error("antipodal rows at {row}; slerp is undefined")]
    AntipodalRow { row: usize },
    #[error("interpolation parameter t={0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("invalid interpolation parameters: {0}")]
    InvalidParams(String),
}

/// Row-major `rows x dim` grid of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(rows: usize, dim: usize, data: Vec<T>) -> Result<Self, GeometryError> {
        if rows == 0 || dim == 0 {
            return Err(GeometryError::Empty);
        }
        if data.len() != rows * dim {
            return Err(GeometryError::BadLength {
                rows,
                dim,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { row: i / dim });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, GeometryError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(GeometryError::LengthMismatch(dim, bad.len()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.dim)
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingMatrix<U> {
        EmbeddingMatrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }

    /// Multiply row `r` by `factor`.
    pub fn scale_row(&mut self, r: usize, factor: T) {
        let dim = self.dim;
        for v in &mut self.data[r * dim..(r + 1) * dim] {
            *v = *v * factor;
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), GeometryError> {
        if self.shape() != other.shape() {
            return Err(GeometryError::ShapeMismatch(self.shape(), other.shape()));
        }
        Ok(())
    }

    fn first_zero_row(&self) -> Option<usize> {
        self.iter_rows().position(|r| norm(r) == T::zero())
    }
}

/// Angle between two nonzero vectors, from the clamped cosine.
pub fn angle<T: Scalar>(a: &[T], b: &[T]) -> Result<T, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::LengthMismatch(a.len(), b.len()));
    }
    cosine(a, b).map(T::acos).ok_or(GeometryError::ZeroVector)
}

/// Great-circle interpolation from `p0` (t = 0) to `p1` (t = 1).
///
/// Falls back to linear interpolation when the angle is below `fallback_angle`,
/// and refuses (nearly) antipodal inputs.
pub fn slerp<T: Scalar>(p0: &[T], p1: &[T], t: T, fallback_angle: T) -> Result<Vec<T>, GeometryError> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(GeometryError::ParameterOutOfRange(t.to_f64_lossy()));
    }
    let theta = angle(p0, p1)?;
    let pi = T::of(std::f64::consts::PI);
    if pi - theta < fallback_angle {
        return Err(GeometryError::Antipodal);
    }
    let (w0, w1) = if theta < fallback_angle {
        (T::one() - t, t)
    } else {
        let s = theta.sin();
        (((T::one() - t) * theta).sin() / s, (t * theta).sin() / s)
    };
    Ok(p0.iter().zip(p1).map(|(&a, &b)| w0 * a + w1 * b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult<T> {
    /// Rotation applied to `p1` by [`apply_shift`].
    pub shift: usize,
    pub score: T,
    /// Score for every candidate shift, indexed by shift.
    pub all_scores: Vec<T>,
}

/// Cyclic row rotation: row `r` of the result is row `(r + shift) mod L` of `p`.
pub fn apply_shift<T: Scalar>(p: &EmbeddingMatrix<T>, shift: usize) -> EmbeddingMatrix<T> {
    let l = p.rows;
    let s = shift % l;
    let mut data = Vec::with_capacity(p.data.len());
    for r in 0..l {
        data.extend_from_slice(p.row((r + s) % l));
    }
    EmbeddingMatrix { data, ..*p }
}

/// Pick the cyclic shift of `p1` whose rows best match `p0`.
///
/// For each shift, rows are grouped into consecutive non-overlapping chunks
/// of `window` rows (the last chunk may be shorter); the shift's score is the
/// mean over chunks of the mean row-wise cosine. Ties go to the smallest shift.
pub fn chunked_align<T: Scalar>(
    p0: &EmbeddingMatrix<T>,
    p1: &EmbeddingMatrix<T>,
    window: usize,
) -> Result<AlignmentResult<T>, GeometryError> {
    p0.check_same_shape(p1)?;
    let l = p0.rows;
    if window == 0 || window > l {
        return Err(GeometryError::InvalidParams(format!(
            "window {window} must be in [1, {l}]"
        )));
    }
    if let Some(row) = p0.first_zero_row() {
        return Err(GeometryError::ZeroRow { which: "p0", row });
    }
    if let Some(row) = p1.first_zero_row() {
        return Err(GeometryError::ZeroRow { which: "p1", row });
    }

    // cos[r][j] = cosine(p0[r], p1[j]); every shift reads from this table.
    let unit = |m: &EmbeddingMatrix<T>| -> Vec<Vec<T>> {
        m.iter_rows()
            .map(|r| {
                let n = norm(r);
                r.iter().map(|&v| v / n).collect()
            })
            .collect()
    };
    let (u0, u1) = (unit(p0), unit(p1));
    let cos: Vec<Vec<T>> = u0
        .iter()
        .map(|a| {
            u1.iter()
                .map(|b| crate::scalar::dot(a, b).max(-T::one()).min(T::one()))
                .collect()
        })
        .collect();

    let chunk_starts: Vec<usize> = (0..l).step_by(window).collect();
    let n_chunks = T::of_usize(chunk_starts.len());
    let all_scores: Vec<T> = (0..l)
        .map(|s| {
            chunk_starts
                .iter()
                .map(|&c| {
                    let end = (c + window).min(l);
                    let sum: T = (c..end).map(|r| cos[r][(r + s) % l]).sum();
                    sum / T::of_usize(end - c)
                })
                .sum::<T>()
                / n_chunks
        })
        .collect();

    let (shift, score) = all_scores
        .iter()
        .enumerate()
        .fold((0, all_scores[0]), |(bs, bv), (s, &v)| if v > bv { (s, v) } else { (bs, bv) });
    Ok(AlignmentResult {
        shift,
        score,
        all_scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolationParams {
    pub n_steps: usize,
    pub align: bool,
    pub window: usize,
    pub lerp_fallback_angle: f64,
}

impl Default for InterpolationParams {
    fn default() -> Self {
        Self {
            n_steps: 10,
            align: true,
            window: 8,
            lerp_fallback_angle: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation<T> {
    /// `n_steps` matrices; the first is `p0`, the last is the (rearranged) `p1`.
    pub steps: Vec<EmbeddingMatrix<T>>,
    pub alignment: Option<AlignmentResult<T>>,
}

/// Row-wise slerp from `p0` to `p1` on the uniform grid `t_j = j / (n_steps - 1)`.
pub fn interpolate_sequence<T: Scalar>(
    p0: &EmbeddingMatrix<T>,
    p1: &EmbeddingMatrix<T>,
    params: &InterpolationParams,
) -> Result<Interpolation<T>, GeometryError> {
    p0.check_same_shape(p1)?;
    if params.n_steps < 2 {
        return Err(GeometryError::InvalidParams("n_steps must be >= 2".into()));
    }
    if let Some(row) = p0.first_zero_row() {
        return Err(GeometryError::ZeroRow { which: "p0", row });
    }
    if let Some(row) = p1.first_zero_row() {
        return Err(GeometryError::ZeroRow { which: "p1", row });
    }
    let alignment = if params.align {
        Some(chunked_align(p0, p1, params.window)?)
    } else {
        None
    };
    let target = match &alignment {
        Some(a) => apply_shift(p1, a.shift),
        None => p1.clone(),
    };

    let fallback = T::of(params.lerp_fallback_angle);
    let last = params.n_steps - 1;
    let mut steps = Vec::with_capacity(params.n_steps);
    steps.push(p0.clone());
    for j in 1..last {
        let t = T::of_usize(j) / T::of_usize(last);
        let mut data = Vec::with_capacity(p0.data.len());
        for r in 0..p0.rows {
            let row = slerp(p0.row(r), target.row(r), t, fallback).map_err(|e| match e {
                GeometryError::Antipodal => GeometryError::AntipodalRow { row: r },
                other => other,
            })?;
            data.extend(row);
        }
        steps.push(EmbeddingMatrix { data, ..*p0 });
    }
    steps.push(target);
    Ok(Interpolation { steps, alignment })
}
