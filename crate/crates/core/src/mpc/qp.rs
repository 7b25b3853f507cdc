use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::MpcConfig;
use crate::error::{Error, Result};
use crate::koopman::KoopmanModel;
use crate::linalg::all_finite;

/// `min ½ xᵀHx + fᵀx  s.t.  lower ≤ A x ≤ upper`, where `x` stacks the
/// input increments and the rows of `A` are the increments themselves
/// followed by the cumulative absolute inputs `u_prev + L x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Absolute inputs are `input_offset + input_map * x`.
    pub input_offset: f64,
    pub input_map: DMatrix<f64>,
}

impl QpProblem {
    /// Pure box constraints `lower ≤ x ≤ upper`.
    pub fn boxed(h: DMatrix<f64>, f: DVector<f64>, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        let n = f.len();
        Self { h, f, a: DMatrix::identity(n, n), lower, upper, input_offset: 0.0, input_map: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }

    /// Largest violation of `lower ≤ A x ≤ upper`.
    pub fn infeasibility(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        (0..ax.len()).map(|i| (self.lower[i] - ax[i]).max(ax[i] - self.upper[i]).max(0.0)).fold(0.0, f64::max)
    }
}

/// Forward-substitute `Y_{i+1} = K Y_i + B u_i` over the prediction horizon.
/// Inputs after the control horizon hold the last increment's value.
pub fn condense(model: &KoopmanModel, latent: &DVector<f64>, last_input: f64, config: &MpcConfig) -> Result<QpProblem> {
    let (tp, tc) = (config.pred_horizon, config.control_horizon);
    let k = model.latent_dim();
    let (op, b) = (&model.operator, &model.input_gain);
    if !all_finite(op) || !all_finite(b) || !latent.iter().all(|v| v.is_finite()) {
        return Err(Error::Format("non-finite model or latent state in condense".into()));
    }
    if latent.len() != k {
        return Err(Error::Dimension { context: "mpc latent", expected: k, actual: latent.len() });
    }
    if b.ncols() != 1 {
        return Err(Error::Dimension { context: "mpc input channels", expected: 1, actual: b.ncols() });
    }
    let reference = config.reference_latent(model)?;

    // free[i] = K^{i+1} z, impulse[j] = K^j B.
    let mut free = Vec::with_capacity(tp);
    let mut impulse = Vec::with_capacity(tp);
    let mut z = latent.clone();
    let mut kb = b.column(0).into_owned();
    for _ in 0..tp {
        z = op * z;
        free.push(z.clone());
        impulse.push(kb.clone());
        kb = op * kb;
    }
    // u_i = u_prev + Σ_{j ≤ min(i, tc-1)} Δu_j
    let s = DMatrix::from_fn(tp, tc, |i, j| if j <= i.min(tc - 1) { 1.0 } else { 0.0 });
    // Γ maps absolute inputs to stacked latents: Y_{i+1} = ... + Σ_{l ≤ i} K^{i-l} B u_l.
    let mut gamma = DMatrix::zeros(k * tp, tp);
    for i in 0..tp {
        for l in 0..=i {
            gamma.view_mut((i * k, l), (k, 1)).copy_from(&impulse[i - l]);
        }
    }
    let g = &gamma * &s;
    let mut e = DVector::zeros(k * tp);
    let ones = DVector::from_element(tp, last_input);
    let forced = &gamma * ones;
    for i in 0..tp {
        let block = &free[i] + forced.rows(i * k, k) - &reference;
        e.rows_mut(i * k, k).copy_from(&block);
    }
    let qy = config.q_y;
    let h = (g.transpose() * &g * qy + DMatrix::identity(tc, tc) * config.q_u) * 2.0;
    let f = g.transpose() * &e * (2.0 * qy);

    let (du_min, du_max) = config.increment_bounds();
    let lmat = DMatrix::from_fn(tc, tc, |i, j| if j <= i { 1.0 } else { 0.0 });
    let mut a = DMatrix::zeros(2 * tc, tc);
    a.view_mut((0, 0), (tc, tc)).copy_from(&DMatrix::identity(tc, tc));
    a.view_mut((tc, 0), (tc, tc)).copy_from(&lmat);
    let lower = DVector::from_fn(2 * tc, |i, _| if i < tc { du_min } else { config.u_min - last_input });
    let upper = DVector::from_fn(2 * tc, |i, _| if i < tc { du_max } else { config.u_max - last_input });
    Ok(QpProblem { h: (&h + h.transpose()) * 0.5, f, a, lower, upper, input_offset: last_input, input_map: lmat })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Max of the primal and dual KKT residuals at the returned point.
    pub residual: f64,
    /// `max_iter` was reached before the tolerance was met.
    pub degraded: bool,
    pub solve_time_s: f64,
}

fn project(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].clamp(lo[i], hi[i]))
}

/// KKT residual of `(x, y)` relative to the problem scale: stationarity
/// `‖Hx + f + Aᵀy‖∞`, primal infeasibility and complementarity (negative
/// multipliers belong to lower bounds, positive ones to upper bounds).
fn kkt_residual(p: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let hx = &p.h * x;
    let aty = p.a.transpose() * y;
    let scale = 1.0 + hx.amax().max(aty.amax()).max(p.f.amax());
    let stat = (hx + &p.f + aty).amax() / scale;
    let ax = &p.a * x;
    let comp = (0..ax.len())
        .map(|i| {
            if y[i] == 0.0 {
                return 0.0;
            }
            let slack = if y[i] > 0.0 { p.upper[i] - ax[i] } else { ax[i] - p.lower[i] };
            y[i].abs() * slack.max(0.0) / scale
        })
        .fold(0.0, f64::max);
    stat.max(p.infeasibility(x)).max(comp)
}

/// Jacobi scaling: `x = D x̂` with unit Hessian diagonal and unit-norm
/// constraint rows `E A D`.
struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
}

impl Scaling {
    fn new(p: &QpProblem) -> Self {
        let n = p.dim();
        let d = DVector::from_fn(n, |i, _| {
            let h = p.h[(i, i)];
            if h > 1e-12 { 1.0 / h.sqrt() } else { 1.0 }
        });
        let e = DVector::from_fn(p.a.nrows(), |r, _| {
            let norm = (0..n).map(|j| (p.a[(r, j)] * d[j]).powi(2)).sum::<f64>().sqrt();
            if norm > 1e-12 { 1.0 / norm } else { 1.0 }
        });
        Self { d, e }
    }

    fn apply(&self, p: &QpProblem) -> QpProblem {
        let dm = DMatrix::from_diagonal(&self.d);
        let em = DMatrix::from_diagonal(&self.e);
        QpProblem {
            h: &dm * &p.h * &dm,
            f: p.f.component_mul(&self.d),
            a: &em * &p.a * &dm,
            lower: p.lower.component_mul(&self.e),
            upper: p.upper.component_mul(&self.e),
            input_offset: p.input_offset,
            input_map: p.input_map.clone(),
        }
    }
}

/// ADMM with a fixed penalty on the Jacobi-scaled problem, followed by an
/// active-set polish of the unscaled problem.
pub fn solve_qp(p: &QpProblem, tolerance: f64, max_iter: usize) -> Result<QpSolution> {
    let n = p.dim();
    let m = p.a.nrows();
    if p.h.shape() != (n, n) || p.a.ncols() != n || p.lower.len() != m || p.upper.len() != m {
        return Err(Error::Dimension { context: "qp problem", expected: n, actual: p.h.nrows() });
    }
    if (0..m).any(|i| !(p.lower[i] <= p.upper[i])) {
        return Err(Error::InvalidParameter("qp bounds must satisfy lower <= upper".into()));
    }
    let started = Instant::now();
    let scaling = Scaling::new(p);
    let q = scaling.apply(p);
    let sigma = 1e-9;
    let alpha = 1.6;
    let rho = 0.1;
    let kkt = &q.h + DMatrix::identity(n, n) * sigma + q.a.transpose() * &q.a * rho;
    let chol = kkt.cholesky().ok_or_else(|| Error::InvalidParameter("qp hessian is not positive semidefinite".into()))?;

    let mut x = DVector::zeros(n);
    let mut z = project(&(&q.a * &x), &q.lower, &q.upper);
    let mut y = DVector::zeros(m);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let rhs = &x * sigma - &q.f + q.a.transpose() * (&z * rho - &y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &q.a * &x_tilde;
        x = &x_tilde * alpha + &x * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &z * (1.0 - alpha);
        let z_next = project(&(&z_relaxed + &y / rho), &q.lower, &q.upper);
        y += (&z_relaxed - &z_next) * rho;
        z = z_next;
        if iterations % 10 == 0 || iterations == max_iter {
            let ax = &q.a * &x;
            let hx = &q.h * &x;
            let aty = q.a.transpose() * &y;
            let primal = (&ax - &z).amax();
            let dual = (&hx + &q.f + &aty).amax();
            let p_tol = tolerance * (1.0 + ax.amax().max(z.amax()));
            let d_tol = tolerance * (1.0 + hx.amax().max(aty.amax()).max(q.f.amax()));
            if primal <= p_tol && dual <= d_tol {
                converged = true;
                break;
            }
        }
    }
    let x = x.component_mul(&scaling.d);
    let y = y.component_mul(&scaling.e);
    // ADMM iterates satisfy the bounds only in the limit.
    let mut best_x = project_feasible(p, &x);
    let mut best_res = kkt_residual(p, &best_x, &y);
    if let Some((px, py)) = polish(p, &best_x) {
        let px = project_feasible(p, &px);
        let res = kkt_residual(p, &px, &py);
        if res <= best_res {
            best_x = px;
            best_res = res;
        }
    }
    Ok(QpSolution {
        objective: p.objective(&best_x),
        x: best_x.as_slice().to_vec(),
        iterations,
        residual: best_res,
        degraded: !converged && best_res > tolerance,
        solve_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Clamp the increments and then shrink toward zero until the cumulative
/// rows also hold; exact for problems whose bounds contain `x = 0`.
fn project_feasible(p: &QpProblem, x: &DVector<f64>) -> DVector<f64> {
    let n = p.dim();
    let mut out = x.clone();
    for i in 0..n.min(p.a.nrows()) {
        if p.a.row(i).iter().enumerate().all(|(j, v)| if j == i { *v == 1.0 } else { *v == 0.0 }) {
            out[i] = out[i].clamp(p.lower[i], p.upper[i]);
        }
    }
    let zero_ok = (0..p.a.nrows()).all(|i| p.lower[i] <= 0.0 && 0.0 <= p.upper[i]);
    if zero_ok && p.infeasibility(&out) > 0.0 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if p.infeasibility(&(&out * mid)) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out *= lo;
    }
    out
}

/// Primal active-set refinement from a feasible warm start. Constraints are
/// handled in the one-sided form `s_i a_iᵀx ≥ s_i b_i`; a blocking
/// constraint is always independent of the working set, so degenerate
/// vertices are entered one row at a time.
fn polish(p: &QpProblem, x0: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = p.dim();
    let m = p.a.nrows();
    if p.infeasibility(x0) > 0.0 {
        return None;
    }
    let mut x = x0.clone();
    // (row, sign): sign +1 is the lower bound, -1 the upper bound.
    let mut work: Vec<(usize, f64)> = Vec::new();
    for _ in 0..10 * (n + m) {
        let g = &p.h * &x + &p.f;
        let nw = work.len();
        let aw = DMatrix::from_fn(nw, n, |r, j| work[r].1 * p.a[(work[r].0, j)]);
        let z = null_space(&aw, n);
        let step = if z.ncols() == 0 {
            DVector::zeros(n)
        } else {
            let reduced = z.transpose() * &p.h * &z;
            let rg = z.transpose() * &g;
            let dz = match reduced.clone().cholesky() {
                Some(c) => c.solve(&rg),
                None => reduced.svd(true, true).solve(&rg, 1e-14).ok()?,
            };
            -(&z * dz)
        };
        // H step + g = A_Wᵀ λ
        let lambda = if nw == 0 {
            DVector::zeros(0)
        } else {
            aw.transpose().svd(true, true).solve(&(&p.h * &step + &g), 1e-12).ok()?
        };
        if step.amax() <= 1e-12 * (1.0 + x.amax()) {
            let worst = (0..nw).filter(|r| lambda[*r] < 0.0).min_by(|a, b| lambda[*a].total_cmp(&lambda[*b]));
            match worst {
                Some(r) if lambda[r] < -1e-12 * (1.0 + g.amax()) => {
                    work.remove(r);
                    continue;
                }
                _ => {
                    let mut y = DVector::zeros(m);
                    for (r, (i, sgn)) in work.iter().enumerate() {
                        y[*i] = -sgn * lambda[r];
                    }
                    return Some((x, y));
                }
            }
        }
        let a_step = &p.a * &step;
        let a_x = &p.a * &x;
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if work.iter().any(|(w, _)| *w == i) {
                continue;
            }
            let d = a_step[i];
            if d < -1e-14 {
                let t = ((p.lower[i] - a_x[i]) / d).max(0.0);
                if t < alpha {
                    alpha = t;
                    blocking = Some((i, 1.0));
                }
            } else if d > 1e-14 {
                let t = ((p.upper[i] - a_x[i]) / d).max(0.0);
                if t < alpha {
                    alpha = t;
                    blocking = Some((i, -1.0));
                }
            }
        }
        x += step * alpha;
        if let Some(b) = blocking {
            work.push(b);
        }
        for (i, sgn) in &work {
            snap_to_bound(p, &mut x, *i, *sgn);
        }
    }
    None
}

/// Orthonormal basis of `{v : a v = 0}`.
fn null_space(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let full = a.transpose() * a;
    let eig = full.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<_> = (0..n).filter(|i| eig.eigenvalues[*i].abs() <= 1e-10 * scale).map(|i| eig.eigenvectors.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Move `x` along the row direction so that working row `i` sits exactly on
/// its bound; removes drift accumulated over many steps.
fn snap_to_bound(p: &QpProblem, x: &mut DVector<f64>, i: usize, sgn: f64) {
    let row = p.a.row(i).transpose();
    let norm2 = row.norm_squared();
    if norm2 == 0.0 {
        return;
    }
    let target = if sgn > 0.0 { p.lower[i] } else { p.upper[i] };
    let gap = target - row.dot(x);
    if gap.abs() <= 1e-9 * (1.0 + target.abs()) {
        *x += &row * (gap / norm2);
    }
}

/// Box-constrained QP at a tight tolerance.
pub fn solve_box_qp(h: &DMatrix<f64>, f: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> Result<QpSolution> {
    solve_qp(&QpProblem::boxed(h.clone(), f.clone(), lower.clone(), upper.clone()), 1e-9, 10_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koopman::LiftingConfig;
    use crate::nn::{Activation, Dense, DenseNet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_model(k: f64, b: f64) -> KoopmanModel {
        let id = DenseNet {
            layers: vec![Dense { weight: DMatrix::identity(1, 1), bias: DVector::zeros(1), activation: Activation::Identity }],
        };
        KoopmanModel {
            config: LiftingConfig { window: 1, latent_dim: 1, ..Default::default() },
            encoder: id.clone(),
            decoder: id,
            operator: DMatrix::from_element(1, 1, k),
            input_gain: DMatrix::from_element(1, 1, b),
        }
    }

    fn random_model(k: usize, rng: &mut ChaCha8Rng) -> KoopmanModel {
        let mut m = KoopmanModel::init(LiftingConfig {
            window: 3,
            latent_dim: k,
            hidden_encoder: 4,
            hidden_decoder: 4,
            ..Default::default()
        })
        .unwrap();
        m.operator = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-0.4..0.4));
        m.input_gain = DMatrix::from_fn(k, 1, |_, _| rng.gen_range(-1.0..1.0));
        m
    }

    #[test]
    fn zero_gain_gives_pure_increment_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = random_model(3, &mut rng);
        m.input_gain.fill(0.0);
        let cfg = MpcConfig { pred_horizon: 4, control_horizon: 3, ..Default::default() };
        let z = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let p = condense(&m, &z, -3.0, &cfg).unwrap();
        assert_eq!(p.h, DMatrix::identity(3, 3) * (2.0 * cfg.q_u));
        assert_eq!(p.f, DVector::zeros(3));
        let s = solve_qp(&p, 1e-6, 10_000).unwrap();
        assert!(s.x.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn scalar_closed_form() {
        let (k, b, y, u0, qu) = (0.9, 0.5, 2.0, -1.0, 0.01);
        let m = scalar_model(k, b);
        let cfg = MpcConfig {
            pred_horizon: 1,
            control_horizon: 1,
            q_u: qu,
            u_min: -1e6,
            u_max: 1e6,
            du_min: -1e6,
            du_max: 1e6,
            reference: super::super::config::Reference::Latent(vec![0.3]),
            ..Default::default()
        };
        let p = condense(&m, &DVector::from_element(1, y), u0, &cfg).unwrap();
        let s = solve_qp(&p, 1e-10, 10_000).unwrap();
        let want = -(b * (k * y + b * u0 - 0.3)) / (b * b + qu);
        assert!((s.x[0] - want).abs() < 1e-8, "{} vs {}", s.x[0], want);
    }

    #[test]
    fn condensed_cost_matches_unrolled() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let k = rng.gen_range(1..5);
            let m = random_model(k, &mut rng);
            let tc = rng.gen_range(1..5);
            let tp = tc + rng.gen_range(0..4);
            let refv: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = MpcConfig {
                pred_horizon: tp,
                control_horizon: tc,
                q_y: rng.gen_range(0.5..2.0),
                q_u: rng.gen_range(0.0..1.0),
                reference: super::super::config::Reference::Latent(refv.clone()),
                ..Default::default()
            };
            let z0 = DVector::from_fn(k, |_, _| rng.gen_range(-2.0..2.0));
            let u0 = rng.gen_range(-5.0..0.0);
            let p = condense(&m, &z0, u0, &cfg).unwrap();
            let unrolled = |du: &DVector<f64>| {
                let mut z = z0.clone();
                let mut u = u0;
                let mut cost = 0.0;
                for i in 0..tp {
                    if i < tc {
                        u += du[i];
                        cost += cfg.q_u * du[i] * du[i];
                    }
                    z = &m.operator * &z + m.input_gain.column(0) * u;
                    let d = &z - DVector::from_column_slice(&refv);
                    cost += cfg.q_y * d.norm_squared();
                }
                cost
            };
            let c0 = unrolled(&DVector::zeros(tc));
            for _ in 0..10 {
                let du = DVector::from_fn(tc, |_, _| rng.gen_range(-3.0..3.0));
                let got = p.objective(&du) + c0;
                assert!((got - unrolled(&du)).abs() < 1e-9 * (1.0 + got.abs()), "{got} vs {}", unrolled(&du));
            }
        }
    }

    #[test]
    fn interior_solution_is_newton_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(1..5);
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
            let f = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let bound = DVector::from_element(n, 1e6);
            let s = solve_box_qp(&h, &f, &(-&bound), &bound).unwrap();
            let want = -h.clone().lu().solve(&f).unwrap();
            for i in 0..n {
                assert!((s.x[i] - want[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn one_dimensional_clamp() {
        let h = DMatrix::from_element(1, 1, 2.0);
        let f = DVector::from_element(1, -10.0); // minimiser at 5
        let s = solve_box_qp(&h, &f, &DVector::from_element(1, -1.0), &DVector::from_element(1, 2.0)).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9);
        let f = DVector::from_element(1, 10.0);
        let s = solve_box_qp(&h, &f, &DVector::from_element(1, -1.0), &DVector::from_element(1, 2.0)).unwrap();
        assert!((s.x[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn cumulative_bounds_are_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_model(4, &mut rng);
        let cfg = MpcConfig::default();
        let z = DVector::from_fn(4, |_, _| rng.gen_range(-20.0..20.0));
        for u0 in [0.0, -10.0, -25.0] {
            let p = condense(&m, &z, u0, &cfg).unwrap();
            let s = solve_qp(&p, 1e-6, 10_000).unwrap();
            let x = DVector::from_vec(s.x.clone());
            assert!(p.infeasibility(&x) <= 1e-9);
            let u = &p.input_map * &x;
            assert!(u.iter().all(|v| u0 + v >= cfg.u_min - 1e-9 && u0 + v <= cfg.u_max + 1e-9));
        }
    }

    #[test]
    fn optimality_against_random_feasible_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 4;
        let mm = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h = &mm * mm.transpose() + DMatrix::identity(n, n) * 0.1;
        let f = DVector::from_fn(n, |_, _| rng.gen_range(-4.0..4.0));
        let lo = DVector::from_element(n, -1.0);
        let hi = DVector::from_element(n, 1.0);
        let p = QpProblem::boxed(h, f, lo, hi);
        let s = solve_qp(&p, 1e-9, 10_000).unwrap();
        let x = DVector::from_vec(s.x);
        let best = p.objective(&x);
        for _ in 0..1000 {
            let d = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let t: f64 = rng.gen_range(1e-4..0.5);
            let cand = project(&(&x + d * t), &p.lower, &p.upper);
            assert!(p.objective(&cand) >= best - 1e-12);
        }
    }

    #[test]
    fn rejects_bad_bounds_and_shapes() {
        let p = QpProblem::boxed(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::from_element(2, 1.0),
            DVector::from_element(2, -1.0),
        );
        assert!(solve_qp(&p, 1e-6, 100).is_err());
        let mut q = p.clone();
        q.f = DVector::zeros(3);
        assert!(solve_qp(&q, 1e-6, 100).is_err());
    }

    /// Minimiser over every assignment of rows to {free, lower, upper}.
    fn enumerate_optimum(p: &QpProblem) -> f64 {
        let (n, m) = (p.dim(), p.a.nrows());
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(m as u32) {
            let mut rows = Vec::new();
            let mut c = code;
            for i in 0..m {
                match c % 3 {
                    1 => rows.push((i, p.lower[i])),
                    2 => rows.push((i, p.upper[i])),
                    _ => {}
                }
                c /= 3;
            }
            let k = rows.len();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
            let mut rhs = DVector::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-&p.f));
            for (r, (i, b)) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = p.a[(*i, j)];
                    kkt[(j, n + r)] = p.a[(*i, j)];
                }
                rhs[n + r] = *b;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let x = sol.rows(0, n).into_owned();
            if p.infeasibility(&x) <= 1e-9 {
                best = best.min(p.objective(&x));
            }
        }
        best
    }

    #[test]
    fn matches_exhaustive_active_set_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=4);
            let extra = rng.gen_range(0..=2);
            let m = n + extra;
            let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &r * r.transpose() + DMatrix::identity(n, n) * 0.05;
            let f = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let a = DMatrix::from_fn(m, n, |i, j| if i < n { f64::from(u8::from(i == j)) } else { rng.gen_range(-1.0..1.0) });
            let lower = DVector::from_fn(m, |_, _| rng.gen_range(-2.0..0.0));
            let upper = DVector::from_fn(m, |_, _| rng.gen_range(0.0..2.0));
            let p = QpProblem { h, f, a, lower, upper, input_offset: 0.0, input_map: DMatrix::identity(n, n) };
            let oracle = enumerate_optimum(&p);
            let sol = solve_qp(&p, 1e-9, 20_000).unwrap();
            let x = DVector::from_column_slice(&sol.x);
            assert!(p.infeasibility(&x) <= 1e-8);
            assert!((sol.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), "{} vs {}", sol.objective, oracle);
        }
    }
}
