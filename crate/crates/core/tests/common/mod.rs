//! Central finite-difference oracles for the analytic gradients.

#![allow(dead_code)]

use koopman_mpc::baselines::{build_batch, GruConfig, GruModel};
use koopman_mpc::koopman::{embed_windows, evaluate_loss, loss_gradient, ActiveTerms, LiftingConfig, SnapshotMatrices};
use koopman_mpc::neural_mass::SimTrace;
use koopman_mpc::nn::DenseNet;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    assert!(scale > 1e-8, "gradient vanished; the check would be vacuous");
    diff / scale
}

pub fn toy_trace(len: usize, channels: usize, with_input: bool, seed: u64) -> SimTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..channels)
        .map(|c| (0..len).map(|i| (0.3 * i as f64 + c as f64).sin() + 0.1 * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let input = with_input.then(|| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
    SimTrace::new(50.0, 0.0, data, input).unwrap()
}

pub fn koopman_error(terms: ActiveTerms, channels: usize, seed: u64) -> f64 {
    let cfg = LiftingConfig {
        window: 3,
        channels,
        latent_dim: 4,
        hidden_encoder: 5,
        hidden_decoder: 5,
        pred_horizon: 3,
        alpha: 0.01,
        seed,
        ..Default::default()
    };
    let trace = toy_trace(30, channels, false, seed);
    let snaps: SnapshotMatrices = embed_windows(&trace, cfg.window, cfg.pred_horizon).unwrap();
    let mut model = koopman_mpc::koopman::KoopmanModel::init(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    // Zero biases put dead-window latents exactly on a ReLU kink, where a
    // central difference is not a derivative.
    for l in model.encoder.layers.iter_mut().chain(model.decoder.layers.iter_mut()) {
        l.bias = DVector::from_fn(l.outputs(), |_, _| rng.gen_range(-0.3..0.3));
    }
    let operator = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-0.6..0.6));
    let (_, g_enc, g_dec) = loss_gradient(&model.encoder, &model.decoder, &operator, &snaps, cfg.alpha, terms).unwrap();

    let loss = |enc: &DenseNet, dec: &DenseNet| evaluate_loss(enc, dec, &operator, &snaps, cfg.alpha, terms).unwrap().total;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for which in 0..2 {
        let grads = if which == 0 { g_enc.slices() } else { g_dec.slices() };
        let base = if which == 0 { &model.encoder } else { &model.decoder };
        for (s, g) in grads.iter().enumerate() {
            for i in 0..g.len() {
                let mut plus = base.clone();
                plus.param_slices_mut()[s][i] += STEP;
                let mut minus = base.clone();
                minus.param_slices_mut()[s][i] -= STEP;
                let (lp, lm) = if which == 0 {
                    (loss(&plus, &model.decoder), loss(&minus, &model.decoder))
                } else {
                    (loss(&model.encoder, &plus), loss(&model.encoder, &minus))
                };
                analytic.push(g[i]);
                numeric.push((lp - lm) / (2.0 * STEP));
            }
        }
    }
    relative_error(&analytic, &numeric)
}

pub fn gru_error(seed: u64) -> f64 {
    let cfg = GruConfig {
        past_inputs: 2,
        past_outputs: 3,
        horizon: 6,
        batch_size: 3,
        init_hidden: 3,
        output_hidden: 3,
        units: 2,
        channels: 1,
        seed,
        ..Default::default()
    };
    let trace = toy_trace(40, 1, true, seed);
    let batch = build_batch(&trace, &[4, 11, 20], &cfg);
    let model = GruModel::init(cfg).unwrap();
    let (_, grad) = model.loss_gradient(&batch);

    let mut analytic: Vec<f64> = Vec::new();
    let mut numeric: Vec<f64> = Vec::new();
    // 0: initial-state network, 1: cell, 2: output network.
    for part in 0..3 {
        let grads = match part {
            0 => grad.init.slices(),
            1 => grad.cell.param_slices(),
            _ => grad.output.slices(),
        };
        for (s, g) in grads.iter().enumerate() {
            for i in 0..g.len() {
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    let slot = match part {
                        0 => &mut m.init.param_slices_mut()[s][i],
                        1 => &mut m.cell.param_slices_mut()[s][i],
                        _ => &mut m.output.param_slices_mut()[s][i],
                    };
                    *slot += delta;
                    m.loss_gradient(&batch).0
                };
                analytic.push(g[i]);
                numeric.push((eval(STEP) - eval(-STEP)) / (2.0 * STEP));
            }
        }
    }
    relative_error(&analytic, &numeric)
}
