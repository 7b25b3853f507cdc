//! Eigen-analysis of a fitted operator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One eigenpair of the operator with its continuous-time interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoopmanMode {
    pub eigenvalue: Complex64,
    pub eigenvector: Vec<Complex64>,
    /// `angle(λ) · rate / 2π` (Hz).
    pub frequency_hz: f64,
    /// `ln|λ| · rate` (1/s). Negative is damped.
    pub growth_rate: f64,
    /// Inverse iteration did not converge to a clean eigenvector.
    pub approximate: bool,
}

/// Eigenvalues from the real Schur form; eigenvectors by inverse iteration.
/// Modes are ordered by decreasing `|λ|`.
pub fn spectral_decomposition(operator: &DMatrix<f64>, sample_rate: f64) -> Vec<KoopmanMode> {
    let n = operator.nrows();
    if n == 0 || operator.ncols() != n {
        return Vec::new();
    }
    let eigenvalues = operator.clone().complex_eigenvalues();
    let op_c: DMatrix<Complex64> = operator.map(|v| Complex64::new(v, 0.0));
    let scale = operator.norm().max(1e-300);

    let mut modes: Vec<KoopmanMode> = eigenvalues
        .iter()
        .map(|&lambda| {
            let (vector, residual) = inverse_iteration(&op_c, lambda, scale);
            KoopmanMode {
                eigenvalue: lambda,
                eigenvector: vector.iter().copied().collect(),
                frequency_hz: lambda.arg() * sample_rate / (2.0 * std::f64::consts::PI),
                growth_rate: lambda.norm().ln() * sample_rate,
                approximate: !(residual <= 1e-8 * scale),
            }
        })
        .collect();
    modes.sort_by(|a, b| b.eigenvalue.norm().total_cmp(&a.eigenvalue.norm()));
    modes
}

fn inverse_iteration(op: &DMatrix<Complex64>, lambda: Complex64, scale: f64) -> (DVector<Complex64>, f64) {
    let n = op.nrows();
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let shifted = op - DMatrix::<Complex64>::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    v /= Complex64::new(v.norm(), 0.0);
    for _ in 0..4 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|c| c.re.is_finite() && c.im.is_finite()) && w.norm() > 0.0 => {
                let norm = w.norm();
                v = w / Complex64::new(norm, 0.0);
            }
            _ => break,
        }
    }
    let residual = (op * &v - &v * lambda).norm();
    (v, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koopman::embed_windows;
    use crate::koopman::operator::fit_operator;
    use crate::neural_mass::SimTrace;

    #[test]
    fn identity_spectrum() {
        let modes = spectral_decomposition(&DMatrix::identity(3, 3), 50.0);
        assert_eq!(modes.len(), 3);
        for m in modes {
            assert!((m.eigenvalue - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(m.frequency_hz.abs() < 1e-12);
            assert!(m.growth_rate.abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_spectrum() {
        let theta: f64 = 0.3;
        let r = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let modes = spectral_decomposition(&r, 50.0);
        for m in &modes {
            assert!((m.eigenvalue.norm() - 1.0).abs() < 1e-12);
            assert!((m.frequency_hz.abs() - theta * 50.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-10);
            assert!(!m.approximate);
            let v = DVector::from_vec(m.eigenvector.clone());
            let rc = r.map(|x| Complex64::new(x, 0.0));
            assert!((rc * &v - &v * m.eigenvalue).norm() < 1e-8);
        }
    }

    #[test]
    fn sinusoid_mode_frequency() {
        let rate = 50.0;
        let s: Vec<f64> = (0..400).map(|i| (2.0 * std::f64::consts::PI * 4.0 * i as f64 / rate).sin()).collect();
        let trace = SimTrace::new(rate, 0.0, vec![s], None).unwrap();
        let snaps = embed_windows(&trace, 6, 1).unwrap();
        let k = fit_operator(&snaps.x, &snaps.y).unwrap();
        let modes = spectral_decomposition(&k, rate);
        let dominant = modes
            .iter()
            .filter(|m| m.frequency_hz > 0.0)
            .max_by(|a, b| a.eigenvalue.norm().total_cmp(&b.eigenvalue.norm()))
            .unwrap();
        assert!((dominant.frequency_hz - 4.0).abs() < 0.5, "{}", dominant.frequency_hz);
    }

    #[test]
    fn defective_matrix_reports_eigenvalues() {
        let jordan = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let modes = spectral_decomposition(&jordan, 10.0);
        assert_eq!(modes.len(), 2);
        for m in modes {
            assert!((m.eigenvalue.re - 1.0).abs() < 1e-6);
        }
    }
}
