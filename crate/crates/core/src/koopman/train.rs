use log::debug;
use serde::{Deserialize, Serialize};

use super::config::LiftingConfig;
use super::embed::{embed_windows, SnapshotMatrices};
use super::loss::{loss_gradient, ActiveTerms, LossBreakdown};
use super::model::KoopmanModel;
use super::operator::fit_operator;
use crate::error::{Error, Result};
use crate::neural_mass::SimTrace;
use crate::nn::Adam;

/// Per-epoch mean of the batch objectives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<LossBreakdown>,
}

impl TrainingHistory {
    pub fn first(&self) -> Option<&LossBreakdown> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&LossBreakdown> {
        self.epochs.last()
    }
}

/// Train on every delay window of `trace` with all four loss terms.
pub fn train(trace: &SimTrace, config: LiftingConfig) -> Result<KoopmanModel> {
    train_with_terms(trace, config, ActiveTerms::ALL).map(|(m, _)| m)
}

pub fn train_with_terms(
    trace: &SimTrace,
    config: LiftingConfig,
    terms: ActiveTerms,
) -> Result<(KoopmanModel, TrainingHistory)> {
    config.validate()?;
    if trace.n_channels() != config.channels {
        return Err(Error::Config(format!(
            "trace has {} channels, config expects {}",
            trace.n_channels(),
            config.channels
        )));
    }
    let snaps = embed_windows(trace, config.window, config.pred_horizon)?;
    train_snapshots(&snaps, config, terms)
}

/// Adam over contiguous column batches. Each step re-fits the operator on
/// the batch latents and holds it fixed while back-propagating; after the
/// last epoch the operator is re-fitted on all training latents.
pub fn train_snapshots(
    snaps: &SnapshotMatrices,
    config: LiftingConfig,
    terms: ActiveTerms,
) -> Result<(KoopmanModel, TrainingHistory)> {
    let mut model = KoopmanModel::init(config)?;
    if snaps.x.nrows() != config.input_dim() {
        return Err(Error::Dimension { context: "snapshot rows", expected: config.input_dim(), actual: snaps.x.nrows() });
    }
    let total = snaps.len();
    if total < config.batch_len {
        return Err(Error::TraceTooShort {
            needed: config.batch_len + config.window + config.pred_horizon - 1,
            available: total + config.window + config.pred_horizon - 1,
        });
    }
    let batches: Vec<SnapshotMatrices> = (0..total)
        .step_by(config.batch_len)
        .map(|start| snaps.columns(start, config.batch_len.min(total - start)))
        .collect();

    let mut enc_opt = Adam::new(config.learning_rate);
    let mut dec_opt = Adam::new(config.learning_rate);
    let mut history = TrainingHistory::default();

    for epoch in 1..=config.epochs {
        let mut mean = LossBreakdown::default();
        for batch in &batches {
            let xl = model.encoder.forward(&batch.x);
            let yl = model.encoder.forward(&batch.y);
            let operator = fit_operator(&xl, &yl)?;
            let (loss, g_enc, g_dec) =
                loss_gradient(&model.encoder, &model.decoder, &operator, batch, config.alpha, terms)?;
            if !loss.total.is_finite() || !g_enc.all_finite() || !g_dec.all_finite() {
                return Err(Error::Diverged { epoch });
            }
            enc_opt.step(model.encoder.param_slices_mut(), g_enc.slices());
            dec_opt.step(model.decoder.param_slices_mut(), g_dec.slices());
            model.operator = operator;
            accumulate(&mut mean, &loss, batches.len());
        }
        if epoch == 1 || epoch % 50 == 0 {
            debug!("epoch {epoch}: total {:.5}", mean.total);
        }
        history.epochs.push(mean);
    }

    let xl = model.encoder.forward(&snaps.x);
    let yl = model.encoder.forward(&snaps.y);
    model.operator = fit_operator(&xl, &yl)?;
    if !model.operator.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged { epoch: config.epochs });
    }
    Ok((model, history))
}

fn accumulate(mean: &mut LossBreakdown, loss: &LossBreakdown, n: usize) {
    let w = 1.0 / n as f64;
    mean.recon += loss.recon * w;
    mean.y_pred += loss.y_pred * w;
    mean.z_pred += loss.z_pred * w;
    mean.lin += loss.lin * w;
    mean.regularization += loss.regularization * w;
    mean.total += loss.total * w;
}
