//! Right-hand sides of the single- and double-column Jansen-Rit systems.
//!
//! State layout. Single column: index `i` holds `y_{i+1}`, i.e.
//! `[y1, y2, y3, y4, y5, y6]` where `y1..y3` are the PSPs onto the
//! pyramidal, excitatory and inhibitory populations and `y4..y6` their
//! velocities. Double column: index `i` holds `y_i` for `i = 0..16`;
//! column one occupies `0..6` (`y0..y2` positions, `y3..y5` velocities),
//! column two `6..12`, and the delayed coupling filters `12..16`.
//!
//! Mapping between the two layouts for one column:
//! single `[0,1,2,3,4,5]` <-> double `[0,1,2,3,4,5]` (column one) or
//! `[6,7,8,9,10,11]` (column two). The names differ, the positions agree.

use serde::{Deserialize, Serialize};

use super::params::{sigmoid, DoubleColumnParams, JansenRitParams};
use crate::error::{Error, Result};

pub const SINGLE_DIM: usize = 6;
pub const DOUBLE_DIM: usize = 16;

/// A Jansen-Rit state vector (mV and mV/s entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmmState(pub Vec<f64>);

impl NmmState {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// A first-order ODE `x' = f(t, x, u)` with scalar input `u`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn derivative(&self, t: f64, state: &[f64], input: f64, out: &mut [f64]);
}

fn check_dims(context: &'static str, expected: usize, state: &[f64], out: &[f64]) -> Result<()> {
    if state.len() != expected {
        return Err(Error::Dimension { context, expected, actual: state.len() });
    }
    if out.len() != expected {
        return Err(Error::Dimension { context, expected, actual: out.len() });
    }
    Ok(())
}

/// Single cortical column. The control input `u` is added to `y2'`.
pub fn single_column_rhs(
    state: &[f64],
    u: f64,
    params: &JansenRitParams,
    out: &mut [f64],
) -> Result<()> {
    check_dims("single_column_rhs", SINGLE_DIM, state, out)?;
    single_unchecked(state, u, params, out);
    Ok(())
}

#[inline]
fn single_unchecked(y: &[f64], u: f64, p: &JansenRitParams, out: &mut [f64]) {
    let (a, b) = (p.excitatory_rate, p.inhibitory_rate);
    let [c1, c2, c3, c4] = p.connectivity;
    out[0] = y[3];
    out[1] = y[4] + u;
    out[2] = y[5];
    out[3] = p.excitatory_gain * a * sigmoid(y[1] - y[2], p) - 2.0 * a * y[3] - a * a * y[0];
    out[4] = p.excitatory_gain * a * (p.pulse_density + c2 * sigmoid(c1 * y[0], p))
        - 2.0 * a * y[4]
        - a * a * y[1];
    out[5] = p.inhibitory_gain * b * c4 * sigmoid(c3 * y[0], p) - 2.0 * b * y[5] - b * b * y[2];
}

/// Two coupled columns. The control input `u` is added to `y1'`, the
/// first column's pyramidal-PSP velocity, mirroring the single-column site.
pub fn double_column_rhs(
    state: &[f64],
    u: f64,
    params: &DoubleColumnParams,
    out: &mut [f64],
) -> Result<()> {
    check_dims("double_column_rhs", DOUBLE_DIM, state, out)?;
    double_unchecked(state, u, params, out);
    Ok(())
}

#[inline]
fn double_unchecked(y: &[f64], u: f64, p: &DoubleColumnParams, out: &mut [f64]) {
    let c = &p.first;
    let d = &p.second;
    // Rates and sigmoid shape come from the first column.
    let (a, b) = (c.excitatory_rate, c.inhibitory_rate);
    let ad = p.delayed_rate;
    let s = |v: f64| sigmoid(v, c);
    let [c1, c2, c3, c4] = c.connectivity;
    let [d1, d2, d3, d4] = d.connectivity;
    let s1 = s(y[1] - y[2]);
    let s2 = s(y[7] - y[8]);

    out[0] = y[3];
    out[3] = c.excitatory_gain * a * s1 - 2.0 * a * y[3] - a * a * y[0];
    out[1] = y[4] + u;
    out[4] = c.excitatory_gain * a * (c.pulse_density + c2 * s(c1 * y[0]) + p.k2 * y[13])
        - 2.0 * a * y[4]
        - a * a * y[1];
    out[2] = y[5];
    out[5] = c.inhibitory_gain * b * c4 * s(c3 * y[0]) - 2.0 * b * y[5] - b * b * y[2];

    out[6] = y[9];
    out[9] = d.excitatory_gain * a * s2 - 2.0 * a * y[9] - a * a * y[6];
    out[7] = y[10];
    out[10] = d.excitatory_gain * a * (d.pulse_density + d2 * s(d1 * y[6]) + p.k1 * y[12])
        - 2.0 * a * y[10]
        - a * a * y[7];
    out[8] = y[11];
    out[11] = d.inhibitory_gain * b * d4 * s(d3 * y[6]) - 2.0 * b * y[11] - b * b * y[8];

    // Delayed inter-column filters; the restoring term uses a^2 as written
    // in the reference system, not a_d^2.
    out[12] = y[14];
    out[14] = d.excitatory_gain * ad * s1 - 2.0 * ad * y[14] - a * a * y[12];
    out[13] = y[15];
    out[15] = d.excitatory_gain * ad * s2 - 2.0 * ad * y[15] - a * a * y[13];
}

/// Which Jansen-Rit variant to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ColumnModel {
    Single(JansenRitParams),
    Double(DoubleColumnParams),
}

impl ColumnModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ColumnModel::Single(p) => p.validate(),
            ColumnModel::Double(p) => p.validate(),
        }
    }

    /// Number of EEG channels emitted.
    pub fn channels(&self) -> usize {
        match self {
            ColumnModel::Single(_) => 1,
            ColumnModel::Double(_) => 2,
        }
    }

    /// EEG channels: the pyramidal membrane potential of each column.
    pub fn observe(&self, state: &[f64], out: &mut [f64]) {
        match self {
            ColumnModel::Single(_) => out[0] = state[1] - state[2],
            ColumnModel::Double(_) => {
                out[0] = state[1] - state[2];
                out[1] = state[7] - state[8];
            }
        }
    }

    pub fn initial_state(&self) -> NmmState {
        NmmState::zeros(self.dim())
    }
}

impl OdeSystem for ColumnModel {
    fn dim(&self) -> usize {
        match self {
            ColumnModel::Single(_) => SINGLE_DIM,
            ColumnModel::Double(_) => DOUBLE_DIM,
        }
    }

    fn derivative(&self, _t: f64, state: &[f64], input: f64, out: &mut [f64]) {
        match self {
            ColumnModel::Single(p) => single_unchecked(state, input, p, out),
            ColumnModel::Double(p) => double_unchecked(state, input, p, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent transcription written term-by-term from the published
    // equations with named variables, used as a dual-route oracle.
    fn single_oracle(y: &[f64], d: f64, p: &JansenRitParams) -> [f64; 6] {
        let sig = |v: f64| 2.0 * p.e0 / (1.0 + (p.steepness * (p.v0 - v)).exp());
        let (y1, y2, y3, y4, y5, y6) = (y[0], y[1], y[2], y[3], y[4], y[5]);
        let (aa, bb, a, b) = (p.excitatory_gain, p.inhibitory_gain, p.excitatory_rate, p.inhibitory_rate);
        let (c1, c2, c3, c4) = (p.connectivity[0], p.connectivity[1], p.connectivity[2], p.connectivity[3]);
        let dy1 = y4;
        let dy4 = aa * a * sig(y2 - y3) - 2.0 * a * y4 - a.powi(2) * y1;
        let dy2 = y5 + d;
        let dy5 = aa * a * (p.pulse_density + c2 * sig(c1 * y1)) - 2.0 * a * y5 - a.powi(2) * y2;
        let dy3 = y6;
        let dy6 = bb * b * c4 * sig(c3 * y1) - 2.0 * b * y6 - b.powi(2) * y3;
        [dy1, dy2, dy3, dy4, dy5, dy6]
    }

    fn double_oracle(y: &[f64], u: f64, q: &DoubleColumnParams) -> [f64; 16] {
        let p = &q.first;
        let pp = &q.second;
        let sig = |v: f64| 2.0 * p.e0 / (1.0 + (p.steepness * (p.v0 - v)).exp());
        let (a, b, ad) = (p.excitatory_rate, p.inhibitory_rate, q.delayed_rate);
        let mut d = [0.0; 16];
        d[0] = y[3];
        d[3] = p.excitatory_gain * a * sig(y[1] - y[2]) - 2.0 * a * y[3] - a.powi(2) * y[0];
        d[1] = y[4] + u;
        d[4] = p.excitatory_gain
            * a
            * (p.pulse_density + p.connectivity[1] * sig(p.connectivity[0] * y[0]) + q.k2 * y[13])
            - 2.0 * a * y[4]
            - a.powi(2) * y[1];
        d[2] = y[5];
        d[5] = p.inhibitory_gain * b * p.connectivity[3] * sig(p.connectivity[2] * y[0])
            - 2.0 * b * y[5]
            - b.powi(2) * y[2];
        d[6] = y[9];
        d[9] = pp.excitatory_gain * a * sig(y[7] - y[8]) - 2.0 * a * y[9] - a.powi(2) * y[6];
        d[7] = y[10];
        d[10] = pp.excitatory_gain
            * a
            * (pp.pulse_density + pp.connectivity[1] * sig(pp.connectivity[0] * y[6]) + q.k1 * y[12])
            - 2.0 * a * y[10]
            - a.powi(2) * y[7];
        d[8] = y[11];
        d[11] = pp.inhibitory_gain * b * pp.connectivity[3] * sig(pp.connectivity[2] * y[6])
            - 2.0 * b * y[11]
            - b.powi(2) * y[8];
        d[12] = y[14];
        d[14] = pp.excitatory_gain * ad * sig(y[1] - y[2]) - 2.0 * ad * y[14] - a.powi(2) * y[12];
        d[13] = y[15];
        d[15] = pp.excitatory_gain * ad * sig(y[7] - y[8]) - 2.0 * ad * y[15] - a.powi(2) * y[13];
        d
    }

    #[test]
    fn zero_state_single() {
        let mut p = JansenRitParams::default();
        p.pulse_density = 0.0;
        let s0 = p.sigmoid(0.0);
        let mut out = [0.0; 6];
        single_column_rhs(&[0.0; 6], 0.0, &p, &mut out).unwrap();
        let a = p.excitatory_rate;
        assert_eq!(&out[..3], &[0.0, 0.0, 0.0]);
        assert!((out[3] - 7.8 * a * s0).abs() < 1e-12);
        assert!((out[4] - 7.8 * a * 108.0 * s0).abs() < 1e-9);
        assert!((out[5] - 22.0 * 50.0 * 33.75 * s0).abs() < 1e-9);

        let mut forced = [0.0; 6];
        single_column_rhs(&[0.0; 6], 3.0, &p, &mut forced).unwrap();
        assert_eq!(forced[1], 3.0);
        for i in [0, 2, 3, 4, 5] {
            assert_eq!(forced[i], out[i]);
        }
    }

    #[test]
    fn dimension_errors() {
        let p = JansenRitParams::default();
        let mut out = [0.0; 6];
        assert!(matches!(
            single_column_rhs(&[0.0; 5], 0.0, &p, &mut out),
            Err(Error::Dimension { expected: 6, actual: 5, .. })
        ));
        let q = DoubleColumnParams::default();
        let mut out = [0.0; 16];
        assert!(double_column_rhs(&[0.0; 6], 0.0, &q, &mut out).is_err());
    }

    #[test]
    fn single_matches_dual_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = JansenRitParams::default();
        for _ in 0..200 {
            p.pulse_density = rng.gen_range(0.0..300.0);
            let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let u = rng.gen_range(-25.0..25.0);
            let mut out = [0.0; 6];
            single_column_rhs(&y, u, &p, &mut out).unwrap();
            let oracle = single_oracle(&y, u, &p);
            for i in 0..6 {
                let tol = 1e-12 * oracle[i].abs().max(1.0);
                assert!((out[i] - oracle[i]).abs() <= tol, "component {i}");
            }
        }
    }

    #[test]
    fn double_matches_dual_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = DoubleColumnParams::default();
        for _ in 0..200 {
            let y: Vec<f64> = (0..16).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let u = rng.gen_range(-25.0..25.0);
            let mut out = [0.0; 16];
            double_column_rhs(&y, u, &q, &mut out).unwrap();
            let oracle = double_oracle(&y, u, &q);
            for i in 0..16 {
                let tol = 1e-12 * oracle[i].abs().max(1.0);
                assert!((out[i] - oracle[i]).abs() <= tol, "component {i}");
            }
        }
    }

    #[test]
    fn zero_coupling_double_is_two_singles() {
        let mut q = DoubleColumnParams::default();
        q.k1 = 0.0;
        q.k2 = 0.0;
        let mut out = [0.0; 16];
        double_column_rhs(&[0.0; 16], 0.0, &q, &mut out).unwrap();
        let mut s1 = [0.0; 6];
        let mut s2 = [0.0; 6];
        single_column_rhs(&[0.0; 6], 0.0, &q.first, &mut s1).unwrap();
        single_column_rhs(&[0.0; 6], 0.0, &q.second, &mut s2).unwrap();
        assert_eq!(&out[0..6], &s1);
        assert_eq!(&out[6..12], &s2);

        let mut forced = [0.0; 16];
        double_column_rhs(&[0.0; 16], 3.0, &q, &mut forced).unwrap();
        assert_eq!(forced[1] - out[1], 3.0);
        for i in (0..16).filter(|&i| i != 1) {
            assert_eq!(forced[i], out[i]);
        }
    }
}
