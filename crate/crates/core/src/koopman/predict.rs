use nalgebra::{DMatrix, DVector};

use super::embed::{last_sample, window_matrix, window_vector};
use super::model::KoopmanModel;
use super::operator::fit_operator;
use crate::error::{Error, Result};
use crate::neural_mass::SimTrace;

/// Open-loop rollout from a single seed window.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `decode(encode(seed))`, one row of channel values per window sample.
    pub reconstructed_seed: Vec<Vec<f64>>,
    /// Predicted channel values for each future step.
    pub steps: Vec<Vec<f64>>,
}

fn unflatten(window: &DVector<f64>, channels: usize) -> Vec<Vec<f64>> {
    window.as_slice().chunks(channels).map(<[f64]>::to_vec).collect()
}

/// Iterate `z <- K z + B u` from `encode(seed)` and decode every step.
/// `inputs`, when given, supplies one value per step (single input channel).
pub fn predict(
    model: &KoopmanModel,
    seed_window: &DVector<f64>,
    horizon: usize,
    inputs: Option<&[f64]>,
) -> Result<Prediction> {
    if seed_window.len() != model.input_dim() {
        return Err(Error::Dimension { context: "seed window", expected: model.input_dim(), actual: seed_window.len() });
    }
    if let Some(u) = inputs {
        if u.len() < horizon {
            return Err(Error::Dimension { context: "prediction inputs", expected: horizon, actual: u.len() });
        }
    }
    let channels = model.config.channels;
    let mut z = model.encode_vec(seed_window);
    let reconstructed_seed = unflatten(&model.decode_vec(&z), channels);
    let mut steps = Vec::with_capacity(horizon);
    for i in 0..horizon {
        z = model.step_latent(&z, inputs.map(|u| &u[i..i + 1]));
        steps.push(last_sample(&model.decode_vec(&z), channels));
    }
    Ok(Prediction { reconstructed_seed, steps })
}

/// Receding prediction against a live trace: every `refit_period` steps
/// the latent state is re-anchored to the encoded current observation
/// window and the operator is re-fitted from the last `refit_history`
/// observed window transitions. Returns predictions for samples
/// `start..start + horizon` as a trace aligned with `live`.
pub fn predict_receding(
    model: &KoopmanModel,
    live: &SimTrace,
    start: usize,
    horizon: usize,
    refit_period: usize,
    refit_history: usize,
) -> Result<SimTrace> {
    let w = model.config.window;
    if refit_period == 0 {
        return Err(Error::InvalidParameter("refit period must be >= 1".into()));
    }
    if live.n_channels() != model.config.channels {
        return Err(Error::Dimension { context: "live trace channels", expected: model.config.channels, actual: live.n_channels() });
    }
    if start < w {
        return Err(Error::TraceTooShort { needed: w, available: start });
    }
    if start + horizon > live.len() {
        return Err(Error::TraceTooShort { needed: start + horizon, available: live.len() });
    }
    let channels = live.n_channels();
    let mut out = vec![Vec::with_capacity(horizon); channels];
    let mut operator = model.operator.clone();
    let mut z = DVector::zeros(model.latent_dim());
    for j in 0..horizon {
        let current = start + j - 1;
        if j % refit_period == 0 {
            z = model.encode_vec(&window_vector(live, current, w));
            if let Some(k) = refit_from_history(model, live, current, refit_history)? {
                operator = k;
            }
        }
        let mut next = &operator * &z;
        if let Some(u) = &live.input {
            next += &model.input_gain * DVector::from_element(1, u[current]);
        }
        z = next;
        for (c, v) in last_sample(&model.decode_vec(&z), channels).into_iter().enumerate() {
            out[c].push(v);
        }
    }
    SimTrace::new(live.sample_rate, live.time(start), out, None)
}

/// Least-squares operator from transitions whose target window ends at or
/// before `current`. `None` when no complete transition is available.
pub fn refit_from_history(
    model: &KoopmanModel,
    live: &SimTrace,
    current: usize,
    history: usize,
) -> Result<Option<DMatrix<f64>>> {
    let w = model.config.window;
    if current < w {
        return Ok(None);
    }
    // Transition e -> e + 1 for e in [first, current - 1].
    let first = (w - 1).max(current.saturating_sub(history));
    let count = current - first;
    if count == 0 {
        return Ok(None);
    }
    let x = model.encode(&window_matrix(live, first..current, w));
    let mut y = model.encode(&window_matrix(live, first + 1..current + 1, w));
    if let Some(u) = &live.input {
        let u_row = DMatrix::from_fn(1, count, |_, j| u[first + j]);
        y -= &model.input_gain * u_row;
    }
    fit_operator(&x, &y).map(Some)
}
