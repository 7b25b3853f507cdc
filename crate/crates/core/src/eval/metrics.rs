use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural_mass::SimTrace;

/// Mean squared error and coefficient of determination of one series.
/// `r2` is `None` when the truth is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub mse: f64,
    pub r2: Option<f64>,
}

impl Fit {
    pub fn r2(&self) -> Result<f64> {
        self.r2.ok_or(Error::ConstantTruth)
    }
}

fn check_lengths(truth: usize, prediction: usize) -> Result<()> {
    if truth != prediction {
        return Err(Error::Dimension { context: "prediction length", expected: truth, actual: prediction });
    }
    if truth < 2 {
        return Err(Error::TraceTooShort { needed: 2, available: truth });
    }
    Ok(())
}

fn sums(truth: &[f64], prediction: &[f64]) -> (f64, f64) {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_res = truth.iter().zip(prediction).map(|(y, p)| (y - p).powi(2)).sum();
    let ss_tot = truth.iter().map(|y| (y - mean).powi(2)).sum();
    (ss_res, ss_tot)
}

fn finish(ss_res: f64, ss_tot: f64, len: usize) -> Fit {
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Fit { mse: ss_res / len as f64, r2 }
}

pub fn mse_r2(truth: &[f64], prediction: &[f64]) -> Result<Fit> {
    check_lengths(truth.len(), prediction.len())?;
    let (res, tot) = sums(truth, prediction);
    Ok(finish(res, tot, truth.len()))
}

/// Per-channel fits plus the vector-norm aggregate: squared errors summed
/// across channels at each step and averaged over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFit {
    pub total: Fit,
    pub channels: Vec<Fit>,
}

pub fn mse_r2_traces(truth: &SimTrace, prediction: &SimTrace) -> Result<TraceFit> {
    if truth.n_channels() != prediction.n_channels() {
        return Err(Error::Dimension {
            context: "prediction channels",
            expected: truth.n_channels(),
            actual: prediction.n_channels(),
        });
    }
    check_lengths(truth.len(), prediction.len())?;
    let (mut res, mut tot) = (0.0, 0.0);
    let mut channels = Vec::with_capacity(truth.n_channels());
    for (t, p) in truth.channels.iter().zip(&prediction.channels) {
        let (r, s) = sums(t, p);
        res += r;
        tot += s;
        channels.push(finish(r, s, t.len()));
    }
    Ok(TraceFit { total: finish(res, tot, truth.len()), channels })
}
