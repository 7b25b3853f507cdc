use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::neural_mass::SimTrace;

/// Delay-embedded snapshot matrices. Column `j` of `x` is the window
/// ending at sample `j + window - 1`; `y` is shifted one sample later and
/// `z` `shift` samples later.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrices {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub window: usize,
    pub shift: usize,
}

impl SnapshotMatrices {
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    /// Columns `[start, start + count)`.
    pub fn columns(&self, start: usize, count: usize) -> SnapshotMatrices {
        SnapshotMatrices {
            x: self.x.columns(start, count).into_owned(),
            y: self.y.columns(start, count).into_owned(),
            z: self.z.columns(start, count).into_owned(),
            window: self.window,
            shift: self.shift,
        }
    }
}

/// Flattened window of `window` samples ending at `end` (inclusive),
/// time-major: `[x_{end-w+1}(ch0), x_{end-w+1}(ch1), ..., x_end(ch0), ...]`.
pub fn window_vector(trace: &SimTrace, end: usize, window: usize) -> DVector<f64> {
    let n = trace.n_channels();
    let start = end + 1 - window;
    DVector::from_fn(window * n, |i, _| trace.channels[i % n][start + i / n])
}

/// The most recent channel values held in a flattened window.
pub fn last_sample(window: &DVector<f64>, channels: usize) -> Vec<f64> {
    window.as_slice()[window.len() - channels..].to_vec()
}

/// Windows ending at `ends` stacked as columns.
pub fn window_matrix(trace: &SimTrace, ends: impl ExactSizeIterator<Item = usize>, window: usize) -> DMatrix<f64> {
    let n = trace.n_channels();
    let cols = ends.len();
    let mut m = DMatrix::zeros(window * n, cols);
    for (j, end) in ends.enumerate() {
        let start = end + 1 - window;
        for t in 0..window {
            for c in 0..n {
                m[(t * n + c, j)] = trace.channels[c][start + t];
            }
        }
    }
    m
}

pub fn embed_windows(trace: &SimTrace, window: usize, shift: usize) -> Result<SnapshotMatrices> {
    if window == 0 || shift == 0 {
        return Err(Error::InvalidParameter("window and shift must be >= 1".into()));
    }
    let needed = window + shift;
    if trace.len() < needed {
        return Err(Error::TraceTooShort { needed, available: trace.len() });
    }
    let cols = trace.len() - needed + 1;
    let first_end = window - 1;
    Ok(SnapshotMatrices {
        x: window_matrix(trace, (0..cols).map(|j| first_end + j), window),
        y: window_matrix(trace, (0..cols).map(|j| first_end + j + 1), window),
        z: window_matrix(trace, (0..cols).map(|j| first_end + j + shift), window),
        window,
        shift,
    })
}
