//! Least-squares estimation of the lifted operator and its input gain.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::solve_right;

/// `K = Ỹ · pinv(X̃)`, the Frobenius-optimal linear map advancing latents.
pub fn fit_operator(x_lat: &DMatrix<f64>, y_lat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_lat.shape() != y_lat.shape() {
        return Err(Error::Dimension {
            context: "fit_operator latent shapes",
            expected: x_lat.nrows() * x_lat.ncols(),
            actual: y_lat.nrows() * y_lat.ncols(),
        });
    }
    if x_lat.ncols() == 0 {
        return Err(Error::InvalidParameter("fit_operator needs at least one snapshot".into()));
    }
    solve_right(y_lat, x_lat)
}

/// Joint regression `Ỹ ≈ [K B] [X̃; U]`. `inputs` is `m x N`.
pub fn fit_input_gain(
    x_lat: &DMatrix<f64>,
    y_lat: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if x_lat.shape() != y_lat.shape() || inputs.ncols() != x_lat.ncols() {
        return Err(Error::Dimension {
            context: "fit_input_gain column counts",
            expected: x_lat.ncols(),
            actual: inputs.ncols(),
        });
    }
    if inputs.iter().all(|v| *v == 0.0) {
        return Err(Error::Unidentifiable);
    }
    let k = x_lat.nrows();
    let m = inputs.nrows();
    let mut stacked = DMatrix::zeros(k + m, x_lat.ncols());
    stacked.rows_mut(0, k).copy_from(x_lat);
    stacked.rows_mut(k, m).copy_from(inputs);
    let gains = solve_right(y_lat, &stacked)?;
    Ok((gains.columns(0, k).into_owned(), gains.columns(k, m).into_owned()))
}

/// `B` alone with `K` held fixed: `Ỹ - K X̃ ≈ B U`.
pub fn fit_gain_given_operator(
    operator: &DMatrix<f64>,
    x_lat: &DMatrix<f64>,
    y_lat: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if inputs.iter().all(|v| *v == 0.0) {
        return Err(Error::Unidentifiable);
    }
    let residual = y_lat - operator * x_lat;
    solve_right(&residual, inputs)
}
