use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture, training and receding-prediction settings of the deep
/// Koopman model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftingConfig {
    /// Delay-window length per channel (samples).
    pub window: usize,
    pub channels: usize,
    /// Latent (lifted) dimension `k`.
    pub latent_dim: usize,
    pub hidden_encoder: usize,
    pub hidden_decoder: usize,
    /// Shift of the `Z` snapshots and power of the operator in the
    /// multi-step loss.
    pub pred_horizon: usize,
    /// Weight-decay coefficient on all weight matrices.
    pub alpha: f64,
    pub learning_rate: f64,
    /// Snapshot columns per optimisation step.
    pub batch_len: usize,
    pub epochs: usize,
    /// Steps between operator re-estimations during prediction.
    pub refit_period: usize,
    /// Most recent window transitions used for each re-estimation.
    pub refit_history: usize,
    pub seed: u64,
}

impl Default for LiftingConfig {
    fn default() -> Self {
        Self {
            window: 60,
            channels: 1,
            latent_dim: 64,
            hidden_encoder: 60,
            hidden_decoder: 60,
            pred_horizon: 10,
            alpha: 0.01,
            learning_rate: 1e-3,
            batch_len: 100,
            epochs: 200,
            refit_period: 20,
            refit_history: 100,
            seed: 0,
        }
    }
}

impl LiftingConfig {
    /// Length of one flattened window vector.
    pub fn input_dim(&self) -> usize {
        self.window * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("channels", self.channels),
            ("latent_dim", self.latent_dim),
            ("hidden_encoder", self.hidden_encoder),
            ("hidden_decoder", self.hidden_decoder),
            ("pred_horizon", self.pred_horizon),
            ("batch_len", self.batch_len),
            ("refit_period", self.refit_period),
            ("refit_history", self.refit_history),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}
