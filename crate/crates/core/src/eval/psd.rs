use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided power spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).map_or(0.0, |f| f - self.frequencies[0])
    }

    /// Rectangle-rule integral of the density (≈ variance of the series).
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution()
    }

    /// Index of the largest bin.
    pub fn peak(&self) -> usize {
        (0..self.density.len()).max_by(|a, b| self.density[*a].total_cmp(&self.density[*b])).unwrap_or(0)
    }
}

/// Welch estimate: Hann-windowed, mean-detrended segments of `segment`
/// samples with fractional `overlap`, averaged periodograms.
pub fn welch(series: &[f64], rate: f64, segment: usize, overlap: f64) -> Result<Psd> {
    if segment < 2 {
        return Err(Error::InvalidParameter(format!("psd segment must be >= 2, got {segment}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("psd overlap must lie in [0, 1), got {overlap}")));
    }
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!("sample rate must be > 0, got {rate}")));
    }
    if series.len() < segment {
        return Err(Error::TraceTooShort { needed: segment, available: series.len() });
    }
    let hop = ((segment as f64 * (1.0 - overlap)).round() as usize).max(1);
    // Periodic Hann.
    let window: Vec<f64> = (0..segment).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment as f64).cos()).collect();
    let norm = rate * window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= series.len() {
        let seg = &series[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let nyquist_bin = segment.is_multiple_of(2).then_some(bins - 1);
    let density = acc
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let one_sided = if i == 0 || Some(i) == nyquist_bin { 1.0 } else { 2.0 };
            one_sided * a / (norm * count as f64)
        })
        .collect();
    let frequencies = (0..bins).map(|i| i as f64 * rate / segment as f64).collect();
    Ok(Psd { frequencies, density })
}

/// Relative L1 spectral error `Σ|P̂ − P| / ΣP` over bins in `[lo, hi]` Hz.
pub fn band_error(truth: &Psd, prediction: &Psd, lo: f64, hi: f64) -> Result<f64> {
    if truth.frequencies != prediction.frequencies {
        return Err(Error::Format("psd grids differ".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((f, t), p) in truth.frequencies.iter().zip(&truth.density).zip(&prediction.density) {
        if (lo..=hi).contains(f) {
            num += (p - t).abs();
            den += t;
        }
    }
    if den <= 0.0 {
        return Err(Error::InvalidParameter(format!("truth has no power in [{lo}, {hi}] Hz")));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn sinusoid_has_single_dominant_peak() {
        let x: Vec<f64> = (0..2000).map(|i| (2.0 * PI * 4.0 * f64::from(i) / 50.0).sin()).collect();
        let psd = welch(&x, 50.0, 256, 0.5).unwrap();
        let peak = psd.peak();
        let nearest = (0..psd.frequencies.len())
            .min_by(|a, b| (psd.frequencies[*a] - 4.0).abs().total_cmp(&(psd.frequencies[*b] - 4.0).abs()))
            .unwrap();
        assert_eq!(peak, nearest);
        let mut sorted = psd.density.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert!(10.0 * (psd.density[peak] / median).log10() >= 20.0);
        assert!((psd.integral() - 0.5).abs() < 0.05);
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..20_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let psd = welch(&x, 50.0, 256, 0.5).unwrap();
        assert!(psd.density.iter().all(|d| *d >= 0.0));
        assert!((psd.integral() / variance(&x) - 1.0).abs() < 0.1);
        assert_eq!(*psd.frequencies.last().unwrap(), 25.0);
    }

    #[test]
    fn short_series_and_bad_arguments() {
        assert!(matches!(welch(&[0.0; 10], 50.0, 256, 0.5), Err(Error::TraceTooShort { .. })));
        assert!(welch(&[0.0; 300], 50.0, 256, 1.0).is_err());
        assert!(welch(&[0.0; 300], 0.0, 256, 0.5).is_err());
    }

    #[test]
    fn band_error_identity_and_scale() {
        let x: Vec<f64> = (0..1000).map(|i| (f64::from(i) * 0.9).sin() + (f64::from(i) * 0.3).cos()).collect();
        let a = welch(&x, 50.0, 256, 0.5).unwrap();
        assert_eq!(band_error(&a, &a, 1.0, 20.0).unwrap(), 0.0);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let b = welch(&y, 50.0, 256, 0.5).unwrap();
        assert!((band_error(&a, &b, 1.0, 20.0).unwrap() - 3.0).abs() < 1e-9);
    }
}
