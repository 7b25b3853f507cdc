use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integrate::Rk4;
use super::model::{ColumnModel, OdeSystem};
use super::trace::SimTrace;
use crate::error::{Error, Result};

/// Optional stochastic external drive: `p` is redrawn uniformly from
/// `[low, high]` at every integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveNoise {
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

impl Default for DriveNoise {
    fn default() -> Self {
        Self { low: 120.0, high: 320.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: ColumnModel,
    /// Total simulated time including burn-in (s).
    pub duration: f64,
    /// Initial segment discarded from the output (s).
    pub burn_in: f64,
    /// Internal RK4 step (s).
    pub step: f64,
    /// Output sampling rate (Hz).
    pub sample_rate: f64,
    #[serde(default)]
    pub noise: Option<DriveNoise>,
}

impl SimulationConfig {
    pub fn new(model: ColumnModel, duration: f64) -> Self {
        Self { model, duration, burn_in: 2.0, step: 1e-3, sample_rate: 50.0, noise: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.burn_in >= 0.0 && self.duration > self.burn_in) {
            return Err(Error::InvalidParameter(format!(
                "duration ({}) must exceed burn-in ({})",
                self.duration, self.burn_in
            )));
        }
        self.substeps()?;
        if let Some(n) = self.noise {
            if !(n.low <= n.high) {
                return Err(Error::InvalidParameter("noise low must not exceed high".into()));
            }
        }
        Ok(())
    }

    /// Integration steps per output sample; the rate must divide `1/step`.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("sample rate must be > 0, got {}", self.sample_rate)));
        }
        let ratio = 1.0 / (self.sample_rate * self.step);
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate {} Hz does not divide the integration rate {} Hz",
                self.sample_rate,
                1.0 / self.step
            )));
        }
        Ok(n as usize)
    }

    /// Number of post-burn-in samples.
    pub fn samples(&self) -> usize {
        ((self.duration - self.burn_in) * self.sample_rate).round() as usize
    }
}

/// A Jansen-Rit plant advanced one output sample at a time with a held
/// control input.
#[derive(Debug, Clone)]
pub struct Plant {
    model: ColumnModel,
    state: Vec<f64>,
    t: f64,
    step: f64,
    substeps: usize,
    stepper: Rk4,
    noise: Option<(DriveNoise, ChaCha8Rng)>,
}

impl Plant {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            model: cfg.model,
            state: cfg.model.initial_state().0,
            t: 0.0,
            step: cfg.step,
            substeps: cfg.substeps()?,
            stepper: Rk4::new(cfg.model.dim()),
            noise: cfg.noise.map(|n| (n, ChaCha8Rng::seed_from_u64(n.seed))),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn model(&self) -> &ColumnModel {
        &self.model
    }

    pub fn observe(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.model.channels()];
        self.model.observe(&self.state, &mut out);
        out
    }

    fn fine_step(&mut self, u: f64) -> Result<()> {
        let model = match &mut self.noise {
            None => self.model,
            Some((n, rng)) => {
                let mut m = self.model;
                match &mut m {
                    ColumnModel::Single(p) => p.pulse_density = rng.gen_range(n.low..=n.high),
                    ColumnModel::Double(p) => {
                        p.first.pulse_density = rng.gen_range(n.low..=n.high);
                        p.second.pulse_density = rng.gen_range(n.low..=n.high);
                    }
                }
                m
            }
        };
        self.stepper.step(&model, self.t, self.step, u, &mut self.state);
        self.t += self.step;
        if !self.state.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { time: self.t });
        }
        Ok(())
    }

    /// Advance one output sample period with input `u` held.
    pub fn advance(&mut self, u: f64) -> Result<()> {
        for _ in 0..self.substeps {
            self.fine_step(u)?;
        }
        Ok(())
    }

    /// Advance `seconds` of simulated time with zero input.
    pub fn run_free(&mut self, seconds: f64) -> Result<()> {
        let n = (seconds / self.step).round() as usize;
        for _ in 0..n {
            self.fine_step(0.0)?;
        }
        Ok(())
    }
}

/// Simulate `cfg` and sample the EEG channel(s) after burn-in.
///
/// `input`, when given, is aligned with the output samples (`input[i]` is
/// held over `[t_i, t_{i+1})`); the burn-in runs unforced. Missing trailing
/// input samples are treated as zero.
pub fn generate_trace(cfg: &SimulationConfig, input: Option<&[f64]>) -> Result<SimTrace> {
    let mut plant = Plant::new(cfg)?;
    plant.run_free(cfg.burn_in)?;
    let n = cfg.samples();
    let channels = cfg.model.channels();
    let mut data = vec![Vec::with_capacity(n); channels];
    let mut applied = input.map(|_| Vec::with_capacity(n));
    for i in 0..n {
        for (c, v) in plant.observe().into_iter().enumerate() {
            data[c].push(v);
        }
        let u = input.and_then(|u| u.get(i).copied()).unwrap_or(0.0);
        if let Some(a) = applied.as_mut() {
            a.push(u);
        }
        if i + 1 < n {
            plant.advance(u)?;
        }
    }
    SimTrace::new(cfg.sample_rate, cfg.burn_in, data, applied)
}

/// Peak-to-peak amplitude of each channel.
pub fn peak_to_peak(trace: &SimTrace) -> Vec<f64> {
    trace
        .channels
        .iter()
        .map(|c| {
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_mass::params::{DoubleColumnParams, JansenRitParams};

    fn single(gain: f64, duration: f64) -> SimulationConfig {
        SimulationConfig::new(ColumnModel::Single(JansenRitParams::default().with_gain(gain)), duration)
    }

    #[test]
    fn sample_count_and_times() {
        let cfg = single(7.8, 4.0);
        let t = generate_trace(&cfg, None).unwrap();
        assert_eq!(t.len(), 100);
        assert_eq!(t.t0, 2.0);
        assert_eq!(t.sample_rate, 50.0);
        assert!(t.input.is_none());
    }

    #[test]
    fn rejects_incommensurate_rate() {
        let mut cfg = single(7.8, 4.0);
        cfg.sample_rate = 30.0;
        assert!(generate_trace(&cfg, None).is_err());
        let mut cfg = single(7.8, 1.0);
        cfg.burn_in = 2.0;
        assert!(generate_trace(&cfg, None).is_err());
    }

    #[test]
    fn deterministic_bitwise() {
        let mut cfg = single(7.8, 5.0);
        cfg.noise = Some(DriveNoise { low: 0.0, high: 50.0, seed: 3 });
        let a = generate_trace(&cfg, None).unwrap();
        let b = generate_trace(&cfg, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seizure_amplitude_exceeds_normal() {
        let normal = peak_to_peak(&generate_trace(&single(7.0, 12.0), None).unwrap())[0];
        let seizure = peak_to_peak(&generate_trace(&single(7.8, 12.0), None).unwrap())[0];
        assert!(seizure > 2.0 * normal, "normal {normal}, seizure {seizure}");
        assert!(seizure > 20.0);
    }

    #[test]
    fn zero_coupling_factorizes() {
        let mut dp = DoubleColumnParams::default();
        dp.k1 = 0.0;
        dp.k2 = 0.0;
        let dcfg = SimulationConfig::new(ColumnModel::Double(dp), 6.0);
        let d = generate_trace(&dcfg, None).unwrap();
        let s1 = generate_trace(&SimulationConfig::new(ColumnModel::Single(dp.first), 6.0), None).unwrap();
        let s2 = generate_trace(&SimulationConfig::new(ColumnModel::Single(dp.second), 6.0), None).unwrap();
        for i in 0..d.len() {
            assert!((d.channels[0][i] - s1.channels[0][i]).abs() < 1e-9);
            assert!((d.channels[1][i] - s2.channels[0][i]).abs() < 1e-9);
        }
    }

    #[test]
    fn input_is_recorded_and_applied() {
        let cfg = single(7.8, 4.0);
        let u = vec![-25.0; 100];
        let forced = generate_trace(&cfg, Some(&u)).unwrap();
        let free = generate_trace(&cfg, None).unwrap();
        assert_eq!(forced.input.as_deref(), Some(&u[..]));
        assert_eq!(forced.channels[0][0], free.channels[0][0]);
        assert_ne!(forced.channels[0][10], free.channels[0][10]);
    }
}
