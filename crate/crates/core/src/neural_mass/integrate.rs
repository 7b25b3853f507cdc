//! Classical fixed-step fourth-order Runge-Kutta.

use super::model::{NmmState, OdeSystem};
use crate::error::{Error, Result};

/// A sampled scalar input read with zero-order hold.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    samples: Vec<f64>,
    period: f64,
}

impl InputSignal {
    pub fn new(samples: Vec<f64>, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidParameter(format!("input period must be > 0, got {period}")));
        }
        Ok(Self { samples, period })
    }

    pub fn zero() -> Self {
        Self { samples: Vec::new(), period: 1.0 }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Value held at time `t`. Past the last sample the final value is held;
    /// an empty signal is identically zero.
    pub fn at(&self, t: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        // Small slack so that t = k * period lands on sample k despite rounding.
        let idx = ((t / self.period) + 1e-9).floor();
        let idx = if idx < 0.0 { 0 } else { idx as usize };
        self.samples[idx.min(self.samples.len() - 1)]
    }
}

/// Reusable RK4 stepper holding its stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advance `state` from `t` to `t + h` with the input held at `u`.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, h: f64, u: f64, state: &mut [f64]) {
        let n = state.len();
        sys.derivative(t, state, u, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k1[i];
        }
        sys.derivative(t + 0.5 * h, &self.tmp, u, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k2[i];
        }
        sys.derivative(t + 0.5 * h, &self.tmp, u, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = state[i] + h * self.k3[i];
        }
        sys.derivative(t + h, &self.tmp, u, &mut self.k4);
        for i in 0..n {
            state[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Dense trajectory: one state per step, including the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub step: f64,
    pub times: Vec<f64>,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

fn step_count(duration: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    if !(duration >= step) {
        return Err(Error::InvalidParameter(format!(
            "duration {duration} must be at least one step ({step})"
        )));
    }
    Ok((duration / step).round() as usize)
}

/// Integrate `sys` over `[0, duration]`, calling `visit(i, t_i, x_i)` for
/// every grid point `i = 0..=n` (including the initial state).
pub fn integrate_with<S, F>(
    sys: &S,
    initial: &NmmState,
    duration: f64,
    step: f64,
    input: &InputSignal,
    mut visit: F,
) -> Result<()>
where
    S: OdeSystem + ?Sized,
    F: FnMut(usize, f64, &[f64]),
{
    if initial.0.len() != sys.dim() {
        return Err(Error::Dimension {
            context: "integrate",
            expected: sys.dim(),
            actual: initial.0.len(),
        });
    }
    let n = step_count(duration, step)?;
    let mut stepper = Rk4::new(sys.dim());
    let mut x = initial.0.clone();
    visit(0, 0.0, &x);
    for i in 0..n {
        let t = i as f64 * step;
        stepper.step(sys, t, step, input.at(t), &mut x);
        let t_next = (i + 1) as f64 * step;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { time: t_next });
        }
        visit(i + 1, t_next, &x);
    }
    Ok(())
}

/// Integrate and keep every state.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    initial: &NmmState,
    duration: f64,
    step: f64,
    input: &InputSignal,
) -> Result<Trajectory> {
    let n = step_count(duration, step)?;
    let dim = sys.dim();
    let mut times = Vec::with_capacity(n + 1);
    let mut data = Vec::with_capacity((n + 1) * dim);
    integrate_with(sys, initial, duration, step, input, |_, t, x| {
        times.push(t);
        data.extend_from_slice(x);
    })?;
    Ok(Trajectory { dim, step, times, data })
}
