use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physiological constants of one Jansen-Rit cortical column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JansenRitParams {
    /// Average excitatory synaptic gain `A` (mV). The bifurcation parameter.
    pub excitatory_gain: f64,
    /// Average inhibitory synaptic gain `B` (mV).
    pub inhibitory_gain: f64,
    /// Reciprocal excitatory time constant `a` (Hz).
    pub excitatory_rate: f64,
    /// Reciprocal inhibitory time constant `b` (Hz).
    pub inhibitory_rate: f64,
    /// Potential at half the maximum firing rate (mV).
    pub v0: f64,
    /// Sigmoid steepness (1/mV).
    pub steepness: f64,
    /// Half of the maximum firing rate (Hz).
    pub e0: f64,
    /// Average synaptic connectivities `C1..C4`.
    pub connectivity: [f64; 4],
    /// External pulse density `p` (Hz).
    pub pulse_density: f64,
}

impl Default for JansenRitParams {
    fn default() -> Self {
        Self {
            excitatory_gain: 7.8,
            inhibitory_gain: 22.0,
            excitatory_rate: 100.0,
            inhibitory_rate: 50.0,
            v0: 6.0,
            steepness: 0.56,
            e0: 2.5,
            connectivity: [135.0, 108.0, 33.75, 33.75],
            // Zero drive places the Hopf-like transition at A ~ 7.2115.
            pulse_density: 0.0,
        }
    }
}

impl JansenRitParams {
    pub fn with_gain(mut self, excitatory_gain: f64) -> Self {
        self.excitatory_gain = excitatory_gain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("excitatory_rate", self.excitatory_rate),
            ("inhibitory_rate", self.inhibitory_rate),
            ("steepness", self.steepness),
            ("e0", self.e0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        for (i, c) in self.connectivity.iter().enumerate() {
            if !(*c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("C{} must be >= 0, got {c}", i + 1)));
            }
        }
        for (name, v) in [
            ("excitatory_gain", self.excitatory_gain),
            ("inhibitory_gain", self.inhibitory_gain),
            ("v0", self.v0),
            ("pulse_density", self.pulse_density),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Potential-to-rate sigmoid `2 e0 / (1 + exp(r (v0 - v)))`.
    #[inline]
    pub fn sigmoid(&self, v: f64) -> f64 {
        sigmoid(v, self)
    }
}

/// Potential-to-rate sigmoid. Total; saturates to `0` and `2 e0` at the extremes.
#[inline]
pub fn sigmoid(v: f64, params: &JansenRitParams) -> f64 {
    2.0 * params.e0 / (1.0 + (params.steepness * (params.v0 - v)).exp())
}

/// Two coupled columns. `first` drives `second` through `k1`, `second`
/// drives `first` through `k2`; both share the first column's `a`, `b`,
/// `v0`, `r` and `e0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleColumnParams {
    pub first: JansenRitParams,
    pub second: JansenRitParams,
    pub k1: f64,
    pub k2: f64,
    /// Reciprocal time constant of the delayed inter-column excitation (Hz).
    pub delayed_rate: f64,
}

impl Default for DoubleColumnParams {
    fn default() -> Self {
        let first = JansenRitParams::default();
        Self {
            first,
            second: first.with_gain(7.0),
            k1: 100.0,
            k2: 100.0,
            delayed_rate: first.excitatory_rate / 3.0,
        }
    }
}

impl DoubleColumnParams {
    pub fn validate(&self) -> Result<()> {
        self.first.validate()?;
        self.second.validate()?;
        if !(self.delayed_rate > 0.0 && self.delayed_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delayed_rate must be > 0, got {}",
                self.delayed_rate
            )));
        }
        if !(self.k1.is_finite() && self.k2.is_finite()) {
            return Err(Error::InvalidParameter("k1/k2 must be finite".into()));
        }
        Ok(())
    }
}
