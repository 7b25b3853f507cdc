//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below `PINV_RCOND * sigma_max` are treated as zero.
pub const PINV_RCOND: f64 = 1e-10;

/// Moore-Penrose pseudo-inverse through the SVD with a relative cutoff.
pub fn pinv(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rcond * s_max;
    // V * diag(1/s) * U^T restricted to the retained singular values.
    let mut scaled_vt = v_t.clone();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let f = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        scaled_vt.row_mut(i).scale_mut(f);
    }
    scaled_vt.transpose() * u.transpose()
}

/// Least-squares map `M` minimising `||target - M * source||_F`
/// (minimum-norm when `source` is rank deficient).
pub fn solve_right(target: &DMatrix<f64>, source: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if target.ncols() != source.ncols() {
        return Err(Error::Dimension {
            context: "least-squares column count",
            expected: source.ncols(),
            actual: target.ncols(),
        });
    }
    Ok(target * pinv(source, PINV_RCOND))
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Integer power by repeated squaring.
pub fn matrix_power(m: &DMatrix<f64>, mut exp: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = m.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = &result * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Row-major matrix document used by checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixDoc {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl MatrixDoc {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Format(format!(
                "matrix declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}
