use serde::{Deserialize, Serialize};

use super::metrics::{mse_r2_traces, Fit};
use super::psd::{band_error, welch, Psd};
use super::suppression::{suppression_stats, SuppressionStats};
use crate::error::{Error, Result};
use crate::neural_mass::SimTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub psd_segment: usize,
    pub psd_overlap: f64,
    /// Band for the relative spectral error (Hz).
    pub band: (f64, f64),
    /// Suppression window in absolute simulation time (s).
    pub suppression_window: (f64, f64),
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { psd_segment: 256, psd_overlap: 0.5, band: (1.0, 20.0), suppression_window: (5.0, 10.0) }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("evaluation: {m}")));
        if self.psd_segment < 2 {
            return fail("psd_segment must be >= 2");
        }
        if !(0.0..1.0).contains(&self.psd_overlap) {
            return fail("psd_overlap must lie in [0, 1)");
        }
        if !(0.0 <= self.band.0 && self.band.0 < self.band.1) {
            return fail("band must satisfy 0 <= lo < hi");
        }
        if !(self.suppression_window.0 < self.suppression_window.1) {
            return fail("suppression window must satisfy t0 < t1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPair {
    pub truth: Psd,
    pub prediction: Psd,
    pub band_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub case: String,
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub fit: Fit,
    pub channel_fits: Vec<Fit>,
    pub spectra: Vec<SpectrumPair>,
    pub suppression: Option<SuppressionStats>,
}

impl EvalReport {
    /// Scores a prediction against aligned truth, channel by channel.
    pub fn prediction(
        case: &str,
        model: &str,
        seed: u64,
        config_hash: &str,
        truth: &SimTrace,
        prediction: &SimTrace,
        cfg: &EvalConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let fits = mse_r2_traces(truth, prediction)?;
        let mut spectra = Vec::with_capacity(truth.n_channels());
        for (t, p) in truth.channels.iter().zip(&prediction.channels) {
            let pt = welch(t, truth.sample_rate, cfg.psd_segment, cfg.psd_overlap)?;
            let pp = welch(p, truth.sample_rate, cfg.psd_segment, cfg.psd_overlap)?;
            let band_error = band_error(&pt, &pp, cfg.band.0, cfg.band.1)?;
            spectra.push(SpectrumPair { truth: pt, prediction: pp, band_error });
        }
        Ok(Self {
            case: case.into(),
            model: model.into(),
            seed,
            config_hash: config_hash.into(),
            fit: fits.total,
            channel_fits: fits.channels,
            spectra,
            suppression: None,
        })
    }

    pub fn with_suppression(mut self, uncontrolled: &SimTrace, controlled: &SimTrace, cfg: &EvalConfig) -> Result<Self> {
        self.suppression = Some(suppression_stats(uncontrolled, controlled, cfg.suppression_window)?);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
