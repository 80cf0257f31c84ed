//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value gap used to decide numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Matrices with a larger 2-norm condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Frobenius norm.
pub fn fro(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Ratio of extreme singular values; `inf` for exactly singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a square matrix, refusing near-singular input.
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(m);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { condition });
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular { condition })
}

/// Result of a null-space computation by singular value decomposition.
#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Numerical rank of the input.
    pub rank: usize,
    /// Unit vector spanning the direction of the smallest singular value.
    pub vector: Vec<f64>,
}

impl NullSpace {
    pub fn dim(&self, cols: usize) -> usize {
        cols - self.rank
    }
}

/// Null space of a `rows x cols` matrix with `rows < cols` allowed.
///
/// The matrix is padded with zero rows to a square one so that the full set
/// of right singular vectors is available; rank is decided by the relative
/// gap `RANK_THRESHOLD * sigma_max`.
pub fn null_space(m: &DMatrix<f64>) -> NullSpace {
    let (rows, cols) = m.shape();
    let square = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = &svd.singular_values;
    let max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let rank = if max == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s > RANK_THRESHOLD * max).count()
    };
    let (idx, _) =
        sigma.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
        );
    let vector = v_t.row(idx).iter().cloned().collect();
    NullSpace { rank, vector }
}

/// Generalized cross product of `k - 1` vectors of length `k`: the vector of
/// signed maximal minors, orthogonal to every input row.
pub fn generalized_cross(rows: &[&[f64]]) -> Vec<f64> {
    let k = rows.len() + 1;
    (0..k)
        .map(|j| {
            let minor =
                DMatrix::from_fn(k - 1, k - 1, |r, c| rows[r][if c < j { c } else { c + 1 }]);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * minor.determinant()
        })
        .collect()
}

/// Numerical rank of an arbitrary matrix.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_THRESHOLD * max).count()
}

/// Matrix entries in JSON: a flat row-major array or a list of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum MatrixEntries {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixEntries {
    pub(crate) fn into_flat(self, cols: usize) -> std::result::Result<Vec<f64>, String> {
        match self {
            MatrixEntries::Flat(v) => Ok(v),
            MatrixEntries::Rows(rows) => {
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(format!("matrix rows must have {cols} entries"));
                }
                Ok(rows.concat())
            }
        }
    }
}

pub fn from_row_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Rows of a row-major matrix, for JSON output.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// `max |a - b| / max(|a|, 1)` style relative residual in Frobenius norm.
pub fn relative_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    fro(&(a - b)) / fro(a).max(f64::MIN_POSITIVE)
}
