//! The three learners.
//!
//! Every learner consumes one task at a time and never revisits old data.
//! [`alg1_update`] is the projected, curvature-regularized estimator for a
//! shared minimizer under any [`LossFamily`]; [`alg2_update`] is the
//! gain-scheduled least-squares estimator for drifting linear tasks;
//! [`sgd_update`] is plain per-sample fine-tuning kept as a baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossFamily;
use crate::models::TaskData;
use crate::numkit::{solve_spd, GramSum, SymMatrix, Vector, VectorSum};

/// `‖w‖` above which SGD is reported as diverged.
pub const SGD_DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub w: Vector,
    pub q: SymMatrix,
    /// Number of tasks consumed.
    pub t: usize,
}

impl LearnerState {
    /// `w₀ = 0`, `Q₀ = I`.
    pub fn initial(dim: usize) -> Self {
        LearnerState {
            w: Vector::zeros(dim),
            q: SymMatrix::identity(dim),
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    fn advanced(&self, w: Vector, q: SymMatrix) -> Self {
        LearnerState { w, q, t: self.t + 1 }
    }

    fn check(&self, task: &TaskData) -> Result<()> {
        if self.q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: self.q.dim(),
            });
        }
        task.validate(self.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alg1Config {
    pub mu: f64,
    /// Projection radius `M`.
    pub radius: f64,
    pub family: LossFamily,
}

impl Alg1Config {
    /// `μ` from [`default_mu`] with `C = feature_bound · radius`.
    pub fn with_default_mu(family: LossFamily, radius: f64, feature_bound: f64) -> Result<Self> {
        let cfg = Alg1Config {
            mu: default_mu(&family, feature_bound * radius)?,
            radius,
            family,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be > 0, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Largest admissible gain: `μ = √μ̲` for curvature lower bound `μ̲` over
/// `|ξ| ≤ c`, and exactly 1 for the linear family.
pub fn default_mu(family: &LossFamily, c: f64) -> Result<f64> {
    match family {
        LossFamily::Linear => Ok(1.0),
        _ => Ok(family.curvature_bounds(c)?.mu_lower.sqrt()),
    }
}

/// Default projection radius: ten times a bound on `‖w*‖`.
pub fn default_radius(parameter_bound: f64) -> f64 {
    10.0 * parameter_bound.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alg2Config {
    #[serde(default)]
    pub delta: f64,
    /// Explicit `β_t`, indexed from `t = 1`; overrides the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl Alg2Config {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.delta) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in [0, 0.5), got {}",
                self.delta
            )));
        }
        if let Some(ws) = &self.weights {
            if let Some(b) = ws.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
                return Err(Error::InvalidParameter(format!("weights must be > 0, found {b}")));
            }
        }
        Ok(())
    }

    /// `β_t` for stage `t ≥ 1`.
    pub fn beta(&self, t: usize) -> Result<f64> {
        match &self.weights {
            Some(ws) => {
                if t == 0 {
                    return Err(Error::InvalidParameter("stage index starts at 1".into()));
                }
                ws.get(t - 1).copied().ok_or_else(|| {
                    Error::InvalidParameter(format!("no weight for stage {t} ({} given)", ws.len()))
                })
            }
            None => beta_schedule(t, self.delta),
        }
    }
}

/// `β_t = t^{−δ}`.
pub fn beta_schedule(t: usize, delta: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter("stage index starts at 1".into()));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must lie in [0, 0.5), got {delta}")));
    }
    Ok((t as f64).powf(-delta))
}

fn gram(task: &TaskData) -> SymMatrix {
    let mut g = GramSum::new(task.dim());
    for x in &task.features {
        g.add(x);
    }
    g.value()
}

pub fn alg1_update(state: &LearnerState, task: &TaskData, cfg: &Alg1Config) -> Result<LearnerState> {
    cfg.validate()?;
    state.check(task)?;
    if task.is_empty() {
        return Ok(state.advanced(state.w.clone(), state.q.clone()));
    }
    let q = state.q.add_scaled(cfg.mu * cfg.mu, &gram(task))?;
    let mut grad = VectorSum::new(state.dim());
    for (x, y) in task.samples() {
        let g = cfg.family.g1(x.dot(&state.w), y)?;
        if !g.is_finite() {
            return Err(Error::NonFinite("g1"));
        }
        grad.add_scaled(g, x);
    }
    let step = solve_spd(&q, &grad.value())?;
    let candidate = state.w.sub(&step);
    let w = project_q_ball(&candidate, &q, cfg.radius)?;
    Ok(state.advanced(w, q))
}

/// `argmin_{‖w‖ ≤ radius} (x − w)ᵀQ(x − w)`.
///
/// Outside the ball the minimizer is `(Q + λI)⁻¹Qx` for the unique `λ > 0`
/// putting it on the sphere. The norm is strictly decreasing in `λ`, so the
/// root is bracketed by doubling and then bisected; the returned point is the
/// upper end of the bracket and therefore always feasible.
pub fn project_q_ball(x: &Vector, q: &SymMatrix, radius: f64) -> Result<Vector> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be > 0, got {radius}")));
    }
    if q.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: q.dim(),
        });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("projection input"));
    }
    if x.norm() <= radius {
        return Ok(x.clone());
    }
    let qx = q.mul_vec(x);
    let at = |lambda: f64| solve_spd(&q.add_diagonal(lambda), &qx);

    let mut lo = 0.0;
    let mut hi = q.max_abs().max(1.0);
    let mut w_hi = at(hi)?;
    let mut doublings = 0;
    while w_hi.norm() > radius {
        lo = hi;
        hi *= 2.0;
        w_hi = at(hi)?;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::Degenerate("could not bracket the projection multiplier".into()));
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w_mid = at(mid)?;
        if w_mid.norm() > radius {
            lo = mid;
        } else {
            hi = mid;
            w_hi = w_mid;
        }
    }
    Ok(w_hi)
}

/// `β_t = 0` advances the stage counter without touching `w` or `Q`.
pub fn alg2_update(state: &LearnerState, task: &TaskData, beta: f64) -> Result<LearnerState> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    state.check(task)?;
    if task.is_empty() || beta == 0.0 {
        return Ok(state.advanced(state.w.clone(), state.q.clone()));
    }
    let q = state.q.add_scaled(beta, &gram(task))?;
    let mut innov = VectorSum::new(state.dim());
    for (x, y) in task.samples() {
        innov.add_scaled(y - x.dot(&state.w), x);
    }
    let step = solve_spd(&q, &innov.value().scaled(beta))?;
    Ok(state.advanced(state.w.add_scaled(1.0, &step), q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    #[serde(default = "SgdConfig::default_lr")]
    pub lr: f64,
    #[serde(default = "SgdConfig::default_passes")]
    pub passes: usize,
    pub family: LossFamily,
}

impl SgdConfig {
    fn default_lr() -> f64 {
        0.01
    }

    fn default_passes() -> usize {
        5
    }

    pub fn new(family: LossFamily) -> Self {
        SgdConfig {
            lr: Self::default_lr(),
            passes: Self::default_passes(),
            family,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidParameter(format!("lr must be >= 0, got {}", self.lr)));
        }
        if self.passes == 0 {
            return Err(Error::InvalidParameter("passes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdStatus {
    Stable,
    Diverged,
}

/// Once `‖w‖` exceeds [`SGD_DIVERGENCE_NORM`] the remaining steps are skipped
/// and the blown-up iterate is returned for logging.
pub fn sgd_update(w: &Vector, task: &TaskData, cfg: &SgdConfig) -> Result<(Vector, SgdStatus)> {
    cfg.validate()?;
    task.validate(w.dim())?;
    let mut w = w.clone();
    for _ in 0..cfg.passes {
        for (x, y) in task.samples() {
            let g = cfg.family.g1(x.dot(&w), y)?;
            w = w.add_scaled(-cfg.lr * g, x);
            if !w.is_finite() || w.norm() > SGD_DIVERGENCE_NORM {
                return Ok((w, SgdStatus::Diverged));
            }
        }
    }
    Ok((w, SgdStatus::Stable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{min_eigenvalue, q_norm_sq};
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    fn task(xs: &[&[f64]], ys: &[f64]) -> TaskData {
        TaskData {
            features: xs.iter().map(|x| v(x)).collect(),
            outputs: ys.to_vec(),
            w_true: Vector::zeros(xs.first().map_or(1, |x| x.len())),
            noise_sum: 0.0,
        }
    }

    /// Dense Gaussian elimination with partial pivoting.
    fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    /// Minimizer of `‖w‖² + Σ_k β_k Σ_i (xᵀw − y)²` (w₀ = 0, Q₀ = I).
    fn ridge_oracle(tasks: &[TaskData], betas: &[f64], d: usize) -> Vec<f64> {
        let mut a = vec![vec![0.0; d]; d];
        let mut b = vec![0.0; d];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for (t, beta) in tasks.iter().zip(betas) {
            for (x, y) in t.samples() {
                for i in 0..d {
                    b[i] += beta * x[i] * y;
                    for j in 0..d {
                        a[i][j] += beta * x[i] * x[j];
                    }
                }
            }
        }
        gauss(a, b)
    }

    /// Best point on the circle of radius `m` by angular grid plus local refinement.
    fn circle_oracle(x: &[f64], q: &SymMatrix, m: f64) -> (Vec<f64>, f64) {
        let cost = |th: f64| {
            let p = [m * th.cos(), m * th.sin()];
            q_norm_sq(&[x[0] - p[0], x[1] - p[1]], q).unwrap()
        };
        let step = 1e-3;
        let n = (std::f64::consts::TAU / step) as usize;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..n {
            let th = i as f64 * step;
            let c = cost(th);
            if c < best.1 {
                best = (th, c);
            }
        }
        let (mut a, mut b) = (best.0 - step, best.0 + step);
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if cost(m1) < cost(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let th = 0.5 * (a + b);
        (vec![m * th.cos(), m * th.sin()], cost(th))
    }

    #[test]
    fn alg1_single_sample() {
        let cfg = Alg1Config {
            mu: 1.0,
            radius: 10.0,
            family: LossFamily::Linear,
        };
        let s = alg1_update(&LearnerState::initial(1), &task(&[&[1.0]], &[1.0]), &cfg).unwrap();
        assert_eq!(s.q.get(0, 0), 2.0);
        // argmin ½(w−1)² + ½w²
        let oracle = gauss(vec![vec![2.0]], vec![1.0])[0];
        assert!((s.w[0] - oracle).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn alg1_clipped() {
        let cfg = Alg1Config {
            mu: 1.0,
            radius: 0.3,
            family: LossFamily::Linear,
        };
        let s = alg1_update(&LearnerState::initial(1), &task(&[&[1.0]], &[1.0]), &cfg).unwrap();
        assert!((s.w[0] - 0.3).abs() < 1e-10);
        assert!(s.w[0] <= 0.3);
    }

    #[test]
    fn empty_task_keeps_state() {
        let cfg = Alg1Config {
            mu: 1.0,
            radius: 10.0,
            family: LossFamily::Linear,
        };
        let s0 = LearnerState {
            w: v(&[0.5, -1.0]),
            q: SymMatrix::diagonal(&[2.0, 3.0]),
            t: 4,
        };
        let empty = TaskData::empty(Vector::zeros(2));
        let a = alg1_update(&s0, &empty, &cfg).unwrap();
        let b = alg2_update(&s0, &empty, 1.0).unwrap();
        for s in [a, b] {
            assert_eq!((s.w.clone(), s.q.clone()), (s0.w.clone(), s0.q.clone()));
            assert_eq!(s.t, 5);
        }
    }

    #[test]
    fn alg1_rejects_malformed_saturated_output() {
        let cfg = Alg1Config {
            mu: 0.5,
            radius: 5.0,
            family: LossFamily::Saturated {
                lower: -1.0,
                upper: 1.0,
                floor: -1.0,
                ceiling: 1.0,
            },
        };
        let bad = task(&[&[1.0]], &[3.0]);
        assert!(alg1_update(&LearnerState::initial(1), &bad, &cfg).is_err());
    }

    #[test]
    fn projection_examples() {
        let q = SymMatrix::identity(2);
        assert_eq!(project_q_ball(&v(&[0.3, 0.4]), &q, 1.0).unwrap(), v(&[0.3, 0.4]));
        let p = project_q_ball(&v(&[3.0, 4.0]), &q, 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-10 && (p[1] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn projection_matches_circle_grid() {
        let q = SymMatrix::diagonal(&[1.0, 4.0]);
        let x = v(&[2.0, 1.0]);
        let p = project_q_ball(&x, &q, 1.0).unwrap();
        let (g, best) = circle_oracle(&x, &q, 1.0);
        let ours = q_norm_sq(&x.sub(&p), &q).unwrap();
        assert!(ours <= best + 1e-9, "{ours} vs {best}");
        assert!((p[0] - g[0]).abs() < 1e-5 && (p[1] - g[1]).abs() < 1e-5, "{p:?} vs {g:?}");
        assert!((p.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn projection_rejects_bad_radius() {
        let q = SymMatrix::identity(2);
        assert!(project_q_ball(&v(&[1.0, 1.0]), &q, 0.0).is_err());
    }

    #[test]
    fn alg2_single_sample() {
        let s = alg2_update(&LearnerState::initial(1), &task(&[&[1.0]], &[1.0]), 1.0).unwrap();
        assert_eq!(s.q.get(0, 0), 2.0);
        assert!((s.w[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alg2_zero_gain_is_noop() {
        let s0 = LearnerState::initial(1);
        let s = alg2_update(&s0, &task(&[&[1.0]], &[1.0]), 0.0).unwrap();
        assert_eq!((&s.w, &s.q), (&s0.w, &s0.q));
        let tiny = alg2_update(&s0, &task(&[&[1.0]], &[1.0]), 1e-12).unwrap();
        assert!(tiny.w[0].abs() < 1e-11);
        assert!(alg2_update(&s0, &task(&[&[1.0]], &[1.0]), -1.0).is_err());
    }

    #[test]
    fn alg2_three_tasks_match_ridge() {
        let tasks = vec![
            task(&[&[1.0, 0.5], &[-0.3, 2.0]], &[1.2, -0.7]),
            task(&[&[0.1, 0.1]], &[0.4]),
            task(&[&[2.0, -1.0], &[0.0, 1.0], &[1.5, 1.5]], &[3.0, 0.2, -1.1]),
        ];
        let betas = [1.0, 0.4, 0.7];
        let mut s = LearnerState::initial(2);
        for (t, b) in tasks.iter().zip(betas) {
            s = alg2_update(&s, t, b).unwrap();
        }
        let oracle = ridge_oracle(&tasks, &betas, 2);
        for i in 0..2 {
            assert!((s.w[i] - oracle[i]).abs() <= 1e-12 * oracle[i].abs().max(1.0));
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_schedule(37, 0.0).unwrap(), 1.0);
        assert_eq!(beta_schedule(1, 0.4).unwrap(), 1.0);
        assert!((beta_schedule(100, 0.25).unwrap() - 0.31623).abs() < 1e-5);
        assert!(beta_schedule(0, 0.25).is_err());
        assert!(beta_schedule(3, 0.5).is_err());
    }

    #[test]
    fn explicit_weights_override_schedule() {
        let cfg = Alg2Config {
            delta: 0.3,
            weights: Some(vec![0.2, 0.9]),
        };
        assert_eq!(cfg.beta(2).unwrap(), 0.9);
        assert!(cfg.beta(3).is_err());
    }

    #[test]
    fn sgd_examples() {
        let one = task(&[&[1.0]], &[1.0]);
        let mut cfg = SgdConfig {
            lr: 0.0,
            passes: 3,
            family: LossFamily::Linear,
        };
        assert_eq!(sgd_update(&v(&[0.7]), &one, &cfg).unwrap(), (v(&[0.7]), SgdStatus::Stable));
        cfg.lr = 0.5;
        cfg.passes = 1;
        assert_eq!(sgd_update(&v(&[0.0]), &one, &cfg).unwrap().0, v(&[0.5]));
    }

    #[test]
    fn sgd_converges_to_task_least_squares() {
        let t = task(
            &[&[1.0, 0.2], &[0.3, -1.0], &[-0.5, 0.5], &[0.9, 0.9]],
            &[1.0, -2.0, 0.3, 0.8],
        );
        let cfg = SgdConfig {
            lr: 0.05,
            passes: 20_000,
            family: LossFamily::Linear,
        };
        // lr small enough that the cyclic iterate settles near the LS solution
        let (w, status) = sgd_update(&Vector::zeros(2), &t, &cfg).unwrap();
        assert_eq!(status, SgdStatus::Stable);
        let mut a = vec![vec![0.0; 2]; 2];
        let mut b = vec![0.0; 2];
        for (x, y) in t.samples() {
            for i in 0..2 {
                b[i] += x[i] * y;
                for j in 0..2 {
                    a[i][j] += x[i] * x[j];
                }
            }
        }
        let ls = gauss(a, b);
        assert!(w.distance_sq(&ls).sqrt() < 0.05, "{w:?} vs {ls:?}");
    }

    #[test]
    fn sgd_flags_divergence() {
        let t = task(&[&[10.0]], &[1.0]);
        let cfg = SgdConfig {
            lr: 1.0,
            passes: 100,
            family: LossFamily::Linear,
        };
        assert_eq!(sgd_update(&v(&[0.0]), &t, &cfg).unwrap().1, SgdStatus::Diverged);
    }

    #[test]
    fn default_mu_values() {
        assert_eq!(default_mu(&LossFamily::Linear, 100.0).unwrap(), 1.0);
        let mu = default_mu(&LossFamily::Logistic, 2.0).unwrap();
        let s = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((mu * mu - s * (1.0 - s)).abs() < 1e-9);
    }

    fn arb_task(d: usize) -> impl Strategy<Value = TaskData> {
        prop::collection::vec((prop::collection::vec(-1.0..1.0f64, d), -2.0..2.0f64), 0..6).prop_map(
            move |rows| TaskData {
                features: rows.iter().map(|(x, _)| Vector::from_vec(x.clone())).collect(),
                outputs: rows.iter().map(|(_, y)| *y).collect(),
                w_true: Vector::zeros(d),
                noise_sum: 0.0,
            },
        )
    }

    fn arb_spd(d: usize) -> impl Strategy<Value = SymMatrix> {
        (prop::collection::vec(-1.0..1.0f64, d * d), 0.05..2.0f64).prop_map(move |(a, shift)| {
            let mut m = SymMatrix::identity(d).add_diagonal(shift - 1.0);
            for r in 0..d {
                m.add_outer(1.0, &a[r * d..(r + 1) * d]);
            }
            m
        })
    }

    proptest! {
        #[test]
        fn alg1_keeps_q_monotone_and_w_feasible(
            tasks in prop::collection::vec(arb_task(3), 1..8),
            radius in 0.05..3.0f64,
            logistic in any::<bool>(),
        ) {
            let family = if logistic { LossFamily::Logistic } else { LossFamily::Linear };
            let cfg = Alg1Config { mu: 0.7, radius, family };
            let mut s = LearnerState::initial(3);
            for t in &tasks {
                let t = if logistic {
                    TaskData { outputs: t.outputs.iter().map(|y| (y + 2.0) / 4.0).collect(), ..t.clone() }
                } else {
                    t.clone()
                };
                let next = alg1_update(&s, &t, &cfg).unwrap();
                let diff = next.q.add_scaled(-1.0, &s.q).unwrap();
                prop_assert!(min_eigenvalue(&diff).unwrap() >= -1e-10);
                prop_assert!(next.w.norm() <= radius + 1e-10);
                s = next;
            }
        }

        #[test]
        fn projection_is_idempotent(
            x in prop::collection::vec(-5.0..5.0f64, 3),
            q in arb_spd(3),
            radius in 0.1..4.0f64,
        ) {
            let p = project_q_ball(&Vector::from_vec(x), &q, radius).unwrap();
            prop_assert!(p.norm() <= radius + 1e-10);
            let pp = project_q_ball(&p, &q, radius).unwrap();
            for i in 0..3 {
                prop_assert!((p[i] - pp[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn alg1_and_alg2_coincide_for_linear(tasks in prop::collection::vec(arb_task(2), 1..10)) {
            let cfg = Alg1Config { mu: 1.0, radius: 1e6, family: LossFamily::Linear };
            let (mut a, mut b) = (LearnerState::initial(2), LearnerState::initial(2));
            for t in &tasks {
                a = alg1_update(&a, t, &cfg).unwrap();
                b = alg2_update(&b, t, 1.0).unwrap();
                for i in 0..2 {
                    prop_assert!((a.w[i] - b.w[i]).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn alg2_matches_weighted_ridge(
            tasks in prop::collection::vec(arb_task(3), 1..8),
            betas in prop::collection::vec(0.01..1.0f64, 8),
        ) {
            let mut s = LearnerState::initial(3);
            for (t, b) in tasks.iter().zip(&betas) {
                s = alg2_update(&s, t, *b).unwrap();
            }
            let oracle = ridge_oracle(&tasks, &betas[..tasks.len()], 3);
            let scale = oracle.iter().fold(1.0f64, |m, o| m.max(o.abs()));
            for i in 0..3 {
                prop_assert!((s.w[i] - oracle[i]).abs() <= 1e-8 * scale);
            }
        }

        #[test]
        fn within_task_order_is_irrelevant(t in arb_task(3), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut idx: Vec<usize> = (0..t.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled = TaskData {
                features: idx.iter().map(|&i| t.features[i].clone()).collect(),
                outputs: idx.iter().map(|&i| t.outputs[i]).collect(),
                ..t.clone()
            };
            let s0 = LearnerState { w: Vector::from_vec(vec![0.3, -0.2, 0.1]), ..LearnerState::initial(3) };
            let cfg = Alg1Config { mu: 0.8, radius: 2.0, family: LossFamily::Linear };
            let pairs = [
                (alg1_update(&s0, &t, &cfg).unwrap(), alg1_update(&s0, &shuffled, &cfg).unwrap()),
                (alg2_update(&s0, &t, 0.6).unwrap(), alg2_update(&s0, &shuffled, 0.6).unwrap()),
            ];
            for (a, b) in pairs {
                for i in 0..3 {
                    prop_assert!((a.w[i] - b.w[i]).abs() <= 1e-12);
                }
            }
        }
    }
}
