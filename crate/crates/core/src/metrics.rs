//! Forgetting, regret, excitation and rate fits.
//!
//! Averages are over tasks: each task contributes the *sum* of its
//! per-sample losses, and the total is divided by the number of tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossFamily;
use crate::models::TaskData;
use crate::numkit::{min_eigenvalue, CompensatedSum, GramSum, SymMatrix, Vector};

/// One checkpoint row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub t: usize,
    pub est_err_sq: f64,
    pub forgetting: f64,
    pub regret: f64,
    pub lambda_min: f64,
    pub q_lambda_min: f64,
    pub l_star: f64,
    pub p_star: f64,
}

/// `Σᵢ ℒ(xᵢᵀw, yᵢ)` over one task.
pub fn task_loss(task: &TaskData, w: &Vector, family: &LossFamily) -> Result<f64> {
    let mut s = CompensatedSum::default();
    for (x, y) in task.samples() {
        s.add(family.loss_value(x.dot(w), y)?);
    }
    Ok(s.value())
}

/// `F_t` at `w` over the tasks seen so far.
pub fn forgetting(w: &Vector, seen: &[TaskData], family: &LossFamily) -> Result<f64> {
    if seen.is_empty() {
        return Err(Error::Empty("forgetting needs at least one seen task"));
    }
    let mut s = CompensatedSum::default();
    for task in seen {
        s.add(task_loss(task, w, family)?);
    }
    Ok(s.value() / seen.len() as f64)
}

/// `ℒ*_t` for a fixed reference parameter.
pub fn optimal_loss(tasks: &[TaskData], w_ref: &Vector, family: &LossFamily) -> Result<f64> {
    forgetting(w_ref, tasks, family)
}

/// `𝒫*_t`: each task evaluated at its own generating parameter.
pub fn optimal_loss_per_task(tasks: &[TaskData], family: &LossFamily) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::Empty("optimal loss needs at least one task"));
    }
    let mut s = CompensatedSum::default();
    for task in tasks {
        s.add(task_loss(task, &task.w_true, family)?);
    }
    Ok(s.value() / tasks.len() as f64)
}

/// Append-only running average of per-task losses, one task per stage.
///
/// Used for `R_t` (observe with the estimate held *before* the task) and for
/// the streaming forms of `ℒ*_t` and `𝒫*_t`.
#[derive(Debug, Clone, Default)]
pub struct StageAverage {
    sum: CompensatedSum,
    t: usize,
    finalized: bool,
}

pub type RegretAccumulator = StageAverage;

impl StageAverage {
    pub fn new() -> Self {
        Self::default()
    }

    /// `stage` must be exactly one past the previous call (first call: 1).
    pub fn observe(&mut self, stage: usize, w: &Vector, task: &TaskData, family: &LossFamily) -> Result<f64> {
        if self.finalized {
            return Err(Error::Finalized);
        }
        if stage != self.t + 1 {
            return Err(Error::StageOrder {
                expected: self.t + 1,
                found: stage,
            });
        }
        let loss = task_loss(task, w, family)?;
        self.sum.add(loss);
        self.t = stage;
        Ok(self.value())
    }

    pub fn stages(&self) -> usize {
        self.t
    }

    /// 0 before any observation.
    pub fn value(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.sum.value() / self.t as f64
        }
    }

    pub fn finalize(&mut self) -> Result<f64> {
        if self.finalized {
            return Err(Error::Finalized);
        }
        self.finalized = true;
        Ok(self.value())
    }
}

/// Tracks `λ_min(I + Σ_t Σᵢ x xᵀ)`.
#[derive(Debug, Clone)]
pub struct LambdaMinAccumulator {
    gram: GramSum,
    dim: usize,
}

impl LambdaMinAccumulator {
    pub fn new(dim: usize) -> Self {
        LambdaMinAccumulator {
            gram: GramSum::new(dim),
            dim,
        }
    }

    pub fn add_task(&mut self, task: &TaskData) -> Result<()> {
        task.validate(self.dim)?;
        for x in &task.features {
            self.gram.add(x);
        }
        Ok(())
    }

    pub fn information(&self) -> SymMatrix {
        self.gram.value().add_diagonal(1.0)
    }

    pub fn value(&self) -> Result<f64> {
        min_eigenvalue(&self.information())
    }
}

/// Which points of a series enter a rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    /// Points with `t ≥ t_last / 2`.
    TrailingHalf,
    /// Points with `from ≤ t ≤ to`.
    Range { from: f64, to: f64 },
}

/// Least-squares fit of `log value = intercept + exponent · log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last `t` used.
    pub window: (f64, f64),
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

pub fn rate_fit(series: &[(f64, f64)], window: Window) -> Result<RateFit> {
    let (from, to) = match window {
        Window::TrailingHalf => {
            let last = series
                .iter()
                .map(|p| p.0)
                .fold(f64::NEG_INFINITY, f64::max);
            (0.5 * last, last)
        }
        Window::Range { from, to } => (from, to),
    };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= from && *t <= to)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least {MIN_FIT_POINTS} points in the window, found {}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs positive values, found {v} at t = {t}"
        )));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("rate fit window has a single distinct t".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * n * my.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        exponent,
        intercept,
        r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    fn task(xs: &[&[f64]], ys: &[f64], w: &[f64]) -> TaskData {
        TaskData {
            features: xs.iter().map(|x| v(x)).collect(),
            outputs: ys.to_vec(),
            w_true: v(w),
            noise_sum: 0.0,
        }
    }

    /// Recompute `(1/t) Σ_k Σ_i ½(xᵀw − y)²` with plain loops.
    fn squared_oracle(tasks: &[TaskData], w: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in tasks {
            for (x, y) in t.features.iter().zip(&t.outputs) {
                let r: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - y;
                total += 0.5 * r * r;
            }
        }
        total / tasks.len() as f64
    }

    fn noiseless(w: &[f64]) -> Vec<TaskData> {
        let xs: [&[f64]; 3] = [&[1.0, 0.0], &[0.3, -2.0], &[-1.0, 1.0]];
        xs.iter()
            .map(|x| {
                let y = x[0] * w[0] + x[1] * w[1];
                task(&[x], &[y], w)
            })
            .collect()
    }

    #[test]
    fn forgetting_examples() {
        let fam = LossFamily::Linear;
        let tasks = noiseless(&[2.0, -1.0]);
        assert_eq!(forgetting(&v(&[2.0, -1.0]), &tasks, &fam).unwrap(), 0.0);
        let one = task(&[&[1.0]], &[1.0], &[1.0]);
        assert_eq!(forgetting(&v(&[0.0]), std::slice::from_ref(&one), &fam).unwrap(), 0.5);
        assert!(matches!(forgetting(&v(&[0.0]), &[], &fam), Err(Error::Empty(_))));
    }

    #[test]
    fn regret_examples() {
        let fam = LossFamily::Linear;
        let one = task(&[&[1.0]], &[1.0], &[1.0]);
        let mut acc = RegretAccumulator::new();
        assert_eq!(acc.observe(1, &v(&[0.0]), &one, &fam).unwrap(), 0.5);
        assert!(matches!(
            acc.observe(3, &v(&[0.0]), &one, &fam),
            Err(Error::StageOrder { expected: 2, found: 3 })
        ));
        assert_eq!(acc.finalize().unwrap(), 0.5);
        assert_eq!(acc.observe(2, &v(&[0.0]), &one, &fam), Err(Error::Finalized));
    }

    #[test]
    fn regret_at_truth_is_zero() {
        let fam = LossFamily::Linear;
        let w = [0.5, 1.5];
        let mut acc = StageAverage::new();
        for (k, t) in noiseless(&w).iter().enumerate() {
            acc.observe(k + 1, &v(&w), t, &fam).unwrap();
        }
        assert_eq!(acc.value(), 0.0);
    }

    #[test]
    fn lambda_min_examples() {
        let acc = LambdaMinAccumulator::new(2);
        assert_eq!(acc.value().unwrap(), 1.0);
        let mut acc = LambdaMinAccumulator::new(2);
        acc.add_task(&task(&[&[1.0, 0.0]], &[0.0], &[0.0, 0.0])).unwrap();
        assert!((acc.value().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn per_task_equals_shared_for_common_parameter() {
        let fam = LossFamily::Linear;
        let w = [1.0, 2.0];
        let tasks: Vec<TaskData> = noiseless(&w)
            .into_iter()
            .map(|mut t| {
                t.outputs[0] += 0.3;
                t
            })
            .collect();
        assert_eq!(
            optimal_loss(&tasks, &v(&w), &fam).unwrap(),
            optimal_loss_per_task(&tasks, &fam).unwrap()
        );
    }

    #[test]
    fn rate_fit_examples() {
        let inv: Vec<(f64, f64)> = (1..=50).map(|t| (t as f64, 1.0 / t as f64)).collect();
        let f = rate_fit(&inv, Window::TrailingHalf).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.window, (25.0, 50.0));

        let flat: Vec<(f64, f64)> = (1..=20).map(|t| (t as f64, 3.0)).collect();
        assert!(rate_fit(&flat, Window::TrailingHalf).unwrap().exponent.abs() < 1e-12);

        let logt: Vec<(f64, f64)> = (1..=10_000).map(|t| (t as f64, (t as f64).ln() / t as f64)).collect();
        let f = rate_fit(&logt, Window::Range { from: 100.0, to: 10_000.0 }).unwrap();
        assert!(f.exponent > -1.0 && f.exponent < -0.8, "{}", f.exponent);
    }

    #[test]
    fn rate_fit_rejects_bad_input() {
        let short: Vec<(f64, f64)> = (1..=4).map(|t| (t as f64, 1.0)).collect();
        assert!(rate_fit(&short, Window::Range { from: 0.0, to: 10.0 }).is_err());
        let neg: Vec<(f64, f64)> = (1..=10).map(|t| (t as f64, 5.0 - t as f64)).collect();
        assert!(rate_fit(&neg, Window::TrailingHalf).is_err());
    }

    fn arb_tasks() -> impl Strategy<Value = Vec<TaskData>> {
        prop::collection::vec(
            prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 2), -3.0..3.0f64), 0..5),
            1..12,
        )
        .prop_map(|ts| {
            ts.into_iter()
                .map(|rows| TaskData {
                    features: rows.iter().map(|(x, _)| Vector::from_vec(x.clone())).collect(),
                    outputs: rows.iter().map(|(_, y)| *y).collect(),
                    w_true: Vector::zeros(2),
                    noise_sum: 0.0,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn streaming_matches_recomputation(
            tasks in arb_tasks(),
            ws in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 12),
        ) {
            let fam = LossFamily::Linear;
            let mut acc = RegretAccumulator::new();
            let mut direct = 0.0;
            for (k, t) in tasks.iter().enumerate() {
                acc.observe(k + 1, &Vector::from_vec(ws[k].clone()), t, &fam).unwrap();
                direct += squared_oracle(std::slice::from_ref(t), &ws[k]);
            }
            direct /= tasks.len() as f64;
            prop_assert!((acc.value() - direct).abs() <= 1e-10 * direct.abs().max(1e-300) + 1e-300);
            let f = forgetting(&Vector::from_vec(ws[0].clone()), &tasks, &fam).unwrap();
            let o = squared_oracle(&tasks, &ws[0]);
            prop_assert!((f - o).abs() <= 1e-10 * o.max(1e-300) + 1e-300);
        }

        #[test]
        fn lambda_min_matches_closed_form_and_grows(tasks in arb_tasks()) {
            let mut acc = LambdaMinAccumulator::new(2);
            let mut prev = acc.value().unwrap();
            let (mut a, mut b, mut c) = (1.0, 0.0, 1.0);
            for t in &tasks {
                acc.add_task(t).unwrap();
                for x in &t.features {
                    a += x[0] * x[0];
                    b += x[0] * x[1];
                    c += x[1] * x[1];
                }
                // smaller root of λ² − (a + c)λ + (ac − b²)
                let oracle = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
                let now = acc.value().unwrap();
                prop_assert!((now - oracle).abs() <= 1e-9 * (a + c));
                prop_assert!(now >= prev - 1e-10 * (a + c));
                prev = now;
            }
        }
    }
}
