use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koopman::KoopmanModel;

/// Target of the lifted-space tracking cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Reference {
    /// `encode(0)`: steer the observation window toward quiescence.
    Zero,
    /// Encoded observation window, e.g. a resting healthy segment.
    Window(Vec<f64>),
    /// Explicit latent vector.
    Latent(Vec<f64>),
}

/// Randomised open-loop excitation used to identify the input gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Excitation {
    pub enabled: bool,
    /// Simulated time after burn-in (s).
    pub duration: f64,
    /// Samples each random level is held for.
    pub hold_samples: usize,
    pub seed: u64,
}

impl Default for Excitation {
    fn default() -> Self {
        Self { enabled: true, duration: 20.0, hold_samples: 5, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub pred_horizon: usize,
    pub control_horizon: usize,
    /// `Q_Y = q_y I`.
    pub q_y: f64,
    pub q_u: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub du_min: f64,
    pub du_max: f64,
    /// Use `[-d, d]` with `d = max(|du_min|, |du_max|)` for the increments.
    pub symmetric_increments: bool,
    pub reference: Reference,
    /// Absolute simulation time at which control switches on (s).
    pub start_time: f64,
    /// Steps between operator re-fits during the loop; 0 disables re-fitting.
    pub refit_period: usize,
    pub refit_history: usize,
    /// Minimum input variance over the refit history to re-estimate `B`.
    pub excitation_threshold: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Store measured QP wall-clock times in exported logs (otherwise 0).
    pub record_timing: bool,
    pub excitation: Excitation,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            pred_horizon: 15,
            control_horizon: 15,
            q_y: 1.0,
            q_u: 0.01,
            u_min: -25.0,
            u_max: 0.0,
            du_min: -20.0,
            du_max: 0.0,
            symmetric_increments: false,
            reference: Reference::Zero,
            start_time: 4.0,
            refit_period: 20,
            refit_history: 100,
            excitation_threshold: 1.0,
            tolerance: 1e-6,
            max_iter: 10_000,
            record_timing: false,
            excitation: Excitation::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("mpc: {m}")));
        if self.control_horizon == 0 || self.control_horizon > self.pred_horizon {
            return fail("need 1 <= control_horizon <= pred_horizon");
        }
        if !(self.u_min <= 0.0 && 0.0 <= self.u_max) {
            return fail("input bounds must contain 0");
        }
        let (lo, hi) = self.increment_bounds();
        if !(lo <= 0.0 && 0.0 <= hi) {
            return fail("increment bounds must contain 0");
        }
        if !(self.q_y > 0.0) || !(self.q_u >= 0.0) {
            return fail("q_y must be > 0 and q_u >= 0");
        }
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return fail("solver tolerance and max_iter must be positive");
        }
        if !(self.start_time >= 0.0) {
            return fail("start_time must be >= 0");
        }
        if self.excitation.enabled && (!(self.excitation.duration > 0.0) || self.excitation.hold_samples == 0) {
            return fail("excitation duration and hold_samples must be positive");
        }
        Ok(())
    }

    pub fn increment_bounds(&self) -> (f64, f64) {
        if self.symmetric_increments {
            let d = self.du_min.abs().max(self.du_max.abs());
            (-d, d)
        } else {
            (self.du_min, self.du_max)
        }
    }

    pub fn reference_latent(&self, model: &KoopmanModel) -> Result<DVector<f64>> {
        let k = model.latent_dim();
        let v = match &self.reference {
            Reference::Zero => model.encode_vec(&DVector::zeros(model.input_dim())),
            Reference::Window(w) => {
                if w.len() != model.input_dim() {
                    return Err(Error::Dimension { context: "reference window", expected: model.input_dim(), actual: w.len() });
                }
                model.encode_vec(&DVector::from_column_slice(w))
            }
            Reference::Latent(z) => DVector::from_column_slice(z),
        };
        if v.len() != k {
            return Err(Error::Dimension { context: "reference latent", expected: k, actual: v.len() });
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        MpcConfig::default().validate().unwrap();
        assert_eq!(MpcConfig::default().increment_bounds(), (-20.0, 0.0));
    }

    #[test]
    fn symmetric_flag_widens_increments() {
        let c = MpcConfig { symmetric_increments: true, ..Default::default() };
        assert_eq!(c.increment_bounds(), (-20.0, 20.0));
    }

    #[test]
    fn invalid_combinations() {
        assert!(MpcConfig { control_horizon: 16, ..Default::default() }.validate().is_err());
        assert!(MpcConfig { u_min: 1.0, u_max: 2.0, ..Default::default() }.validate().is_err());
        assert!(MpcConfig { q_y: 0.0, ..Default::default() }.validate().is_err());
        assert!(MpcConfig { q_u: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = MpcConfig { reference: Reference::Window(vec![1.0, 2.0]), ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<MpcConfig>(&text).unwrap(), c);
    }
}
