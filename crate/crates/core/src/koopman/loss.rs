//! The four-term autoencoder objective and its gradient.
//!
//! With `X̃ = g(X)`, `Ỹ = g(Y)` and the operator `K` held constant:
//!
//! ```text
//! recon  = mse(X, g⁻¹(X̃))
//! y_pred = mse(Y, g⁻¹(K X̃))
//! z_pred = mse(Z, g⁻¹(K^p X̃))
//! lin    = mse(Ỹ, K X̃)
//! total  = active terms + alpha * sum ||W||²
//! ```
//!
//! Every `mse` averages over all matrix entries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::embed::SnapshotMatrices;
use super::model::KoopmanModel;
use crate::error::{Error, Result};
use crate::linalg::matrix_power;
use crate::nn::{DenseNet, NetGrad};

/// Which data terms contribute to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveTerms {
    pub recon: bool,
    pub y_pred: bool,
    pub z_pred: bool,
    pub lin: bool,
}

impl ActiveTerms {
    pub const ALL: ActiveTerms = ActiveTerms { recon: true, y_pred: true, z_pred: true, lin: true };
}

impl Default for ActiveTerms {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub y_pred: f64,
    pub z_pred: f64,
    pub lin: f64,
    pub regularization: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn assemble(recon: f64, y_pred: f64, z_pred: f64, lin: f64, regularization: f64, terms: ActiveTerms) -> Self {
        let mut total = 0.0;
        for (on, v) in [(terms.recon, recon), (terms.y_pred, y_pred), (terms.z_pred, z_pred), (terms.lin, lin)] {
            if on {
                total += v;
            }
        }
        total += regularization;
        Self { recon, y_pred, z_pred, lin, regularization, total }
    }
}

fn mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (a - b).norm_squared() / a.len() as f64
}

fn check_shapes(enc: &DenseNet, snaps: &SnapshotMatrices) -> Result<()> {
    for m in [&snaps.x, &snaps.y, &snaps.z] {
        if m.nrows() != enc.inputs() {
            return Err(Error::Dimension { context: "snapshot rows", expected: enc.inputs(), actual: m.nrows() });
        }
        if m.ncols() != snaps.x.ncols() {
            return Err(Error::Dimension { context: "snapshot columns", expected: snaps.x.ncols(), actual: m.ncols() });
        }
    }
    Ok(())
}

/// Evaluate the objective for explicit network parts.
pub fn evaluate_loss(
    encoder: &DenseNet,
    decoder: &DenseNet,
    operator: &DMatrix<f64>,
    snaps: &SnapshotMatrices,
    alpha: f64,
    terms: ActiveTerms,
) -> Result<LossBreakdown> {
    check_shapes(encoder, snaps)?;
    let xl = encoder.forward(&snaps.x);
    let yl = encoder.forward(&snaps.y);
    let k_x = operator * &xl;
    let kp_x = matrix_power(operator, snaps.shift) * &xl;
    let recon = mse(&snaps.x, &decoder.forward(&xl));
    let y_pred = mse(&snaps.y, &decoder.forward(&k_x));
    let z_pred = mse(&snaps.z, &decoder.forward(&kp_x));
    let lin = mse(&yl, &k_x);
    let reg = alpha * (encoder.weight_norm_sq() + decoder.weight_norm_sq());
    Ok(LossBreakdown::assemble(recon, y_pred, z_pred, lin, reg, terms))
}

/// All four terms plus regularisation for a model's own operator.
pub fn total_loss(model: &KoopmanModel, snaps: &SnapshotMatrices) -> Result<LossBreakdown> {
    evaluate_loss(&model.encoder, &model.decoder, &model.operator, snaps, model.config.alpha, ActiveTerms::ALL)
}

/// Objective and gradients with respect to encoder and decoder parameters.
/// The operator is treated as a constant.
pub fn loss_gradient(
    encoder: &DenseNet,
    decoder: &DenseNet,
    operator: &DMatrix<f64>,
    snaps: &SnapshotMatrices,
    alpha: f64,
    terms: ActiveTerms,
) -> Result<(LossBreakdown, NetGrad, NetGrad)> {
    check_shapes(encoder, snaps)?;
    let mut g_enc = encoder.zero_grad();
    let mut g_dec = decoder.zero_grad();

    let x_cache = encoder.forward_cached(&snaps.x);
    let y_cache = encoder.forward_cached(&snaps.y);
    let xl = x_cache.output();
    let yl = y_cache.output();
    let kp = matrix_power(operator, snaps.shift);
    let k_x = operator * xl;
    let kp_x = &kp * xl;

    let n_obs = snaps.x.len() as f64;
    let n_lat = xl.len() as f64;

    let mut d_xl = DMatrix::zeros(xl.nrows(), xl.ncols());

    let rec_cache = decoder.forward_cached(xl);
    let recon = mse(&snaps.x, rec_cache.output());
    if terms.recon {
        let d_out = (rec_cache.output() - &snaps.x) * (2.0 / n_obs);
        d_xl += decoder.backward(&rec_cache, d_out, &mut g_dec);
    }

    let y_cache_dec = decoder.forward_cached(&k_x);
    let y_pred = mse(&snaps.y, y_cache_dec.output());
    if terms.y_pred {
        let d_out = (y_cache_dec.output() - &snaps.y) * (2.0 / n_obs);
        let d_kx = decoder.backward(&y_cache_dec, d_out, &mut g_dec);
        d_xl += operator.transpose() * d_kx;
    }

    let z_cache_dec = decoder.forward_cached(&kp_x);
    let z_pred = mse(&snaps.z, z_cache_dec.output());
    if terms.z_pred {
        let d_out = (z_cache_dec.output() - &snaps.z) * (2.0 / n_obs);
        let d_kpx = decoder.backward(&z_cache_dec, d_out, &mut g_dec);
        d_xl += kp.transpose() * d_kpx;
    }

    let residual = yl - &k_x;
    let lin = residual.norm_squared() / n_lat;
    if terms.lin {
        let d_yl = &residual * (2.0 / n_lat);
        d_xl -= operator.transpose() * &d_yl;
        encoder.backward(&y_cache, d_yl, &mut g_enc);
    }

    encoder.backward(&x_cache, d_xl, &mut g_enc);

    let reg = alpha * (encoder.weight_norm_sq() + decoder.weight_norm_sq());
    if alpha != 0.0 {
        for (g, l) in g_enc.weight.iter_mut().zip(&encoder.layers) {
            *g += &l.weight * (2.0 * alpha);
        }
        for (g, l) in g_dec.weight.iter_mut().zip(&decoder.layers) {
            *g += &l.weight * (2.0 * alpha);
        }
    }
    Ok((LossBreakdown::assemble(recon, y_pred, z_pred, lin, reg, terms), g_enc, g_dec))
}
