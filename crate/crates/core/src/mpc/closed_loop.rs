use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::MpcConfig;
use super::qp::{condense, solve_qp};
use crate::error::{Error, Result};
use crate::koopman::{fit_input_gain, refit_from_history, window_matrix, window_vector, KoopmanModel};
use crate::neural_mass::{generate_trace, Plant, SimTrace, SimulationConfig};

/// Per-step record of a closed-loop run, aligned with the output samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlLog {
    pub times: Vec<f64>,
    /// Input applied over `[t_i, t_{i+1})`.
    pub u: Vec<f64>,
    /// Applied increment `u_i - u_{i-1}`.
    pub du: Vec<f64>,
    /// Observed EEG per channel at `t_i`.
    pub eeg: Vec<Vec<f64>>,
    /// Full optimised increment sequence (empty before control starts).
    pub solved: Vec<Vec<f64>>,
    pub qp_iterations: Vec<usize>,
    pub qp_time_s: Vec<f64>,
    pub degraded: Vec<bool>,
    /// KKT residual of each returned QP solution (0 before control starts).
    pub qp_residual: Vec<f64>,
    /// One-step latent prediction `K z_i + B u_i` made at step `i`.
    pub predicted_latent: Vec<Vec<f64>>,
    /// `encode` of the observed window at step `i + 1`.
    pub realized_latent: Vec<Vec<f64>>,
    pub start_index: usize,
}

/// Aggregate figures for a [`ControlLog`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub steps: usize,
    pub control_steps: usize,
    pub bound_violations: usize,
    pub degraded_steps: usize,
    pub mean_solve_time_s: f64,
    pub mean_qp_iterations: f64,
    pub min_u: f64,
}

impl ControlLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Applied inputs or increments outside their configured bounds.
    pub fn bound_violations(&self, cfg: &MpcConfig) -> usize {
        let (dlo, dhi) = cfg.increment_bounds();
        let eps = 1e-9;
        self.u
            .iter()
            .zip(&self.du)
            .filter(|(u, d)| **u < cfg.u_min - eps || **u > cfg.u_max + eps || **d < dlo - eps || **d > dhi + eps)
            .count()
    }

    pub fn summary(&self, cfg: &MpcConfig) -> ControlSummary {
        let control_steps = self.len() - self.start_index.min(self.len());
        let active = self.start_index..self.len();
        let mean = |v: f64| if control_steps == 0 { 0.0 } else { v / control_steps as f64 };
        ControlSummary {
            steps: self.len(),
            control_steps,
            bound_violations: self.bound_violations(cfg),
            degraded_steps: self.degraded.iter().filter(|d| **d).count(),
            mean_solve_time_s: mean(self.qp_time_s[active.clone()].iter().sum()),
            mean_qp_iterations: mean(self.qp_iterations[active].iter().sum::<usize>() as f64),
            min_u: self.u.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `‖predicted - realised‖` of the one-step latent predictions.
    pub fn latent_errors(&self) -> Vec<f64> {
        self.predicted_latent
            .iter()
            .zip(&self.realized_latent)
            .map(|(p, r)| (DVector::from_column_slice(p) - DVector::from_column_slice(r)).norm())
            .collect()
    }

    /// `t,u,du,eeg_ch0[,eeg_ch1],qp_iters,qp_time_s`.
    pub fn to_csv_string(&self, record_timing: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string(), "u".into(), "du".into()];
        header.extend((0..self.eeg.len()).map(|c| format!("eeg_ch{c}")));
        header.extend(["qp_iters".to_string(), "qp_time_s".into()]);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string(), self.u[i].to_string(), self.du[i].to_string()];
            row.extend(self.eeg.iter().map(|c| c[i].to_string()));
            row.push(self.qp_iterations[i].to_string());
            row.push(if record_timing { self.qp_time_s[i] } else { 0.0 }.to_string());
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Piecewise-constant uniform random input within `[u_min, u_max]`.
pub fn excitation_signal(samples: usize, cfg: &MpcConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.excitation.seed);
    let mut out = Vec::with_capacity(samples);
    let mut level = 0.0;
    for i in 0..samples {
        if i % cfg.excitation.hold_samples == 0 {
            level = rng.gen_range(cfg.u_min..=cfg.u_max);
        }
        out.push(level);
    }
    out
}

/// Latent snapshot triples `(X, Y, U)` of every window transition in `trace`.
fn transitions(model: &KoopmanModel, trace: &SimTrace, first: usize, last: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let w = model.config.window;
    let x = model.encode(&window_matrix(trace, first..last, w));
    let y = model.encode(&window_matrix(trace, first + 1..last + 1, w));
    let u = trace.input.as_ref().map_or_else(
        || DMatrix::zeros(1, last - first),
        |u| DMatrix::from_fn(1, last - first, |_, j| u[first + j]),
    );
    (x, y, u)
}

/// Fit `(K, B)` jointly on a randomised-excitation run of the plant.
pub fn identify_input_gain(model: &KoopmanModel, sim: &SimulationConfig, cfg: &MpcConfig) -> Result<KoopmanModel> {
    let mut run = *sim;
    run.duration = sim.burn_in + cfg.excitation.duration;
    let n = run.samples();
    let w = model.config.window;
    if n < w + 2 {
        return Err(Error::TraceTooShort { needed: w + 2, available: n });
    }
    let trace = generate_trace(&run, Some(&excitation_signal(n, cfg)))?;
    let (x, y, u) = transitions(model, &trace, w - 1, n - 1);
    let (k, b) = fit_input_gain(&x, &y, &u)?;
    let mut out = model.clone();
    out.operator = k;
    out.input_gain = b;
    Ok(out)
}

/// Output of [`closed_loop`].
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub log: ControlLog,
    pub controlled: SimTrace,
    /// Model after identification (and the last in-loop re-fit).
    pub model: KoopmanModel,
}

fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Receding-horizon control of the simulated plant. Before
/// `cfg.start_time` the input is exactly zero; afterwards each step
/// encodes the latest window, solves the condensed QP and applies only the
/// first increment, clamped to the bounds.
pub fn closed_loop(sim: &SimulationConfig, model: &KoopmanModel, cfg: &MpcConfig) -> Result<ClosedLoopRun> {
    cfg.validate()?;
    sim.validate()?;
    model.validate()?;
    let channels = sim.model.channels();
    if model.config.channels != channels {
        return Err(Error::Config(format!("model expects {} channels, plant has {channels}", model.config.channels)));
    }
    let w = model.config.window;
    let dt = 1.0 / sim.sample_rate;
    let n = sim.samples();
    let start = ((cfg.start_time - sim.burn_in) * sim.sample_rate - 1e-9).ceil().max(0.0) as usize;
    if start + 1 < w {
        return Err(Error::InvalidParameter(format!(
            "control start {} s leaves fewer than {w} observed samples after burn-in",
            cfg.start_time
        )));
    }
    let mut model = if cfg.excitation.enabled { identify_input_gain(model, sim, cfg)? } else { model.clone() };
    let (dlo, dhi) = cfg.increment_bounds();

    let mut plant = Plant::new(sim)?;
    plant.run_free(sim.burn_in)?;
    let mut log = ControlLog { eeg: vec![Vec::with_capacity(n); channels], start_index: start, ..Default::default() };
    let mut u_prev = 0.0;
    for i in 0..n {
        for (c, v) in plant.observe().into_iter().enumerate() {
            log.eeg[c].push(v);
        }
        log.times.push(sim.burn_in + i as f64 * dt);
        let mut u = 0.0;
        let (mut iters, mut secs, mut degraded, mut residual) = (0, 0.0, false, 0.0);
        let mut solved = Vec::new();
        if i >= start {
            // The input at sample i is not chosen yet; only earlier inputs are read.
            let mut inputs = log.u.clone();
            inputs.push(u_prev);
            let live = SimTrace::new(sim.sample_rate, sim.burn_in, log.eeg.clone(), Some(inputs))?;
            let window = window_vector(&live, i, w);
            let z = model.encode_vec(&window);
            if i > start {
                log.realized_latent.push(z.as_slice().to_vec());
            }
            if cfg.refit_period > 0 && (i - start).is_multiple_of(cfg.refit_period) {
                refit(&mut model, &live, i, cfg)?;
            }
            let qp = condense(&model, &z, u_prev, cfg)?;
            let sol = solve_qp(&qp, cfg.tolerance, cfg.max_iter)?;
            if sol.degraded {
                warn!("qp reached max_iter at t = {:.3} s (residual {:.2e})", log.times[i], sol.residual);
            }
            let du = sol.x[0].clamp(dlo, dhi);
            u = (u_prev + du).clamp(cfg.u_min, cfg.u_max);
            iters = sol.iterations;
            secs = sol.solve_time_s;
            degraded = sol.degraded;
            residual = sol.residual;
            solved = sol.x;
            log.predicted_latent.push(model.step_latent(&z, Some(&[u])).as_slice().to_vec());
        }
        log.du.push(u - u_prev);
        log.u.push(u);
        log.solved.push(solved);
        log.qp_iterations.push(iters);
        log.qp_time_s.push(secs);
        log.degraded.push(degraded);
        log.qp_residual.push(residual);
        u_prev = u;
        if i + 1 < n {
            plant.advance(u)?;
        }
    }
    // The final prediction has no realised counterpart inside the run.
    log.predicted_latent.truncate(log.realized_latent.len());
    debug!("closed loop finished: {} steps, min u {:.3}", n, log.u.iter().copied().fold(0.0, f64::min));
    let controlled = SimTrace::new(sim.sample_rate, sim.burn_in, log.eeg.clone(), Some(log.u.clone()))?;
    Ok(ClosedLoopRun { log, controlled, model })
}

/// Re-estimate `K` (and `B` when recent inputs are exciting enough) from
/// the last `refit_history` transitions ending at sample `current`.
fn refit(model: &mut KoopmanModel, live: &SimTrace, current: usize, cfg: &MpcConfig) -> Result<()> {
    let w = model.config.window;
    let first = (w - 1).max(current.saturating_sub(cfg.refit_history));
    if current <= first {
        return Ok(());
    }
    let inputs = live.input.as_ref().map_or(&[][..], |u| &u[first..current]);
    if variance(inputs) > cfg.excitation_threshold {
        let (x, y, u) = transitions(model, live, first, current);
        match fit_input_gain(&x, &y, &u) {
            Ok((k, b)) => {
                model.operator = k;
                model.input_gain = b;
                return Ok(());
            }
            Err(Error::Unidentifiable) => {}
            Err(e) => return Err(e),
        }
    }
    if let Some(k) = refit_from_history(model, live, current, cfg.refit_history)? {
        model.operator = k;
    }
    Ok(())
}

/// Unforced run of the same plant for comparison.
pub fn uncontrolled(sim: &SimulationConfig) -> Result<SimTrace> {
    generate_trace(sim, None)
}
