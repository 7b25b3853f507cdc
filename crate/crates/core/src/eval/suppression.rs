use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural_mass::SimTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSuppression {
    pub rms_uncontrolled: f64,
    pub rms_controlled: f64,
    pub ptp_uncontrolled: f64,
    pub ptp_controlled: f64,
    /// `rms_controlled / rms_uncontrolled`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionStats {
    pub window: (f64, f64),
    pub channels: Vec<ChannelSuppression>,
}

impl SuppressionStats {
    pub fn worst_ratio(&self) -> f64 {
        self.channels.iter().map(|c| c.ratio).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn ptp(x: &[f64]) -> f64 {
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// RMS and peak-to-peak of both traces over samples with `t ∈ [t0, t1)`.
pub fn suppression_stats(uncontrolled: &SimTrace, controlled: &SimTrace, window: (f64, f64)) -> Result<SuppressionStats> {
    let (t0, t1) = window;
    let out_of_range = Error::WindowOutOfRange { start: t0, end: t1 };
    if uncontrolled.n_channels() != controlled.n_channels()
        || uncontrolled.sample_rate != controlled.sample_rate
        || (uncontrolled.t0 - controlled.t0).abs() > 1e-9
    {
        return Err(Error::Format("uncontrolled and controlled traces are not aligned".into()));
    }
    let end_time = |tr: &SimTrace| tr.time(tr.len());
    if !(t0 < t1) || t0 < uncontrolled.t0 - 1e-9 || t1 > end_time(uncontrolled).min(end_time(controlled)) + 1e-9 {
        return Err(out_of_range);
    }
    let (a, b) = (uncontrolled.index_at(t0), uncontrolled.index_at(t1));
    if a >= b {
        return Err(out_of_range);
    }
    let mut channels = Vec::with_capacity(uncontrolled.n_channels());
    for (u, c) in uncontrolled.channels.iter().zip(&controlled.channels) {
        let (u, c) = (&u[a..b], &c[a..b]);
        let rms_u = rms(u);
        if rms_u == 0.0 {
            return Err(Error::InvalidParameter("uncontrolled trace is identically zero over the window".into()));
        }
        let rms_c = rms(c);
        channels.push(ChannelSuppression {
            rms_uncontrolled: rms_u,
            rms_controlled: rms_c,
            ptp_uncontrolled: ptp(u),
            ptp_controlled: ptp(c),
            ratio: rms_c / rms_u,
        });
    }
    Ok(SuppressionStats { window, channels })
}
