//! Verification checks.
//!
//! Each check builds its own data, computes the expected answer with an
//! oracle that does not share code with the learners (plain Gaussian
//! elimination, dense grids, direct re-evaluation), and returns a
//! [`CheckOutcome`]. The same functions back `conlearn verify` and the
//! acceptance test target.

use std::fmt;
use std::time::{Duration, Instant};

use conlearn_core::algorithms::{
    alg1_update, alg2_update, project_q_ball, Alg1Config, Alg2Config, LearnerState,
};
use conlearn_core::losses::{LossFamily, PredictorLoss};
use conlearn_core::metrics::{rate_fit, MetricsRecord, Window};
use conlearn_core::models::{FeatureRegime, LogisticObservation, NoiseSpec};
use conlearn_core::numkit::SymMatrix;
use conlearn_core::streams::{build_stream, CaseSpec, GroupAssignment, StreamSpec, TaskOrder};
use conlearn_core::{Result as CoreResult, TaskData, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{Checkpoints, ResolvedConfig, ResolvedLearner};
use crate::demo::{analytic_target, demo_config, DemoLearner, DemoOrder, DEMO_METAS, DEMO_SEEDS, QUOTED_TARGET};
use crate::error::Result;
use crate::output::write_metrics;
use crate::runner::{median, run_replicate, thread_pool, RunResult};

/// Seeds every stochastic check is repeated over.
pub const CHECK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------------------
// oracles

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
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

/// `argmin_w ‖w‖² + Σ_k β_k Σ_i (xᵀw − y)²` from the normal equations.
pub fn weighted_ridge_oracle(tasks: &[TaskData], betas: &[f64]) -> Vec<f64> {
    let d = tasks[0].dim();
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (task, beta) in tasks.iter().zip(betas) {
        for (x, y) in task.features.iter().zip(&task.outputs) {
            for i in 0..d {
                b[i] += beta * x[i] * y;
                for j in 0..d {
                    a[i][j] += beta * x[i] * x[j];
                }
            }
        }
    }
    gauss_solve(a, b)
}

fn quad_form(v: &[f64], q: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * q[i][j] * v[j];
        }
    }
    s
}

fn sphere_point(angles: &[f64], radius: f64) -> Vec<f64> {
    match angles.len() {
        1 => vec![radius * angles[0].cos(), radius * angles[0].sin()],
        _ => {
            let (th, ph) = (angles[0], angles[1]);
            vec![
                radius * th.sin() * ph.cos(),
                radius * th.sin() * ph.sin(),
                radius * th.cos(),
            ]
        }
    }
}

/// Best point on the sphere `‖w‖ = radius` (d = 2 or 3) in Q-distance to
/// `x`: dense angular grid, then a shrinking pattern search.
pub fn sphere_grid_oracle(x: &[f64], q: &[Vec<f64>], radius: f64) -> (Vec<f64>, f64) {
    let cost = |angles: &[f64]| {
        let p = sphere_point(angles, radius);
        let diff: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        quad_form(&diff, q)
    };
    let tau = std::f64::consts::TAU;
    let (mut best, step) = if x.len() == 2 {
        let step = 1e-3;
        let n = (tau / step).ceil() as usize;
        let best = (0..n)
            .map(|i| vec![i as f64 * step])
            .min_by(|a, b| cost(a).total_cmp(&cost(b)))
            .unwrap();
        (best, step)
    } else {
        let step = 0.02;
        let nt = (std::f64::consts::PI / step).ceil() as usize;
        let np = (tau / step).ceil() as usize;
        let best = (0..=nt)
            .flat_map(|i| (0..np).map(move |j| vec![i as f64 * step, j as f64 * step]))
            .min_by(|a, b| cost(a).total_cmp(&cost(b)))
            .unwrap();
        (best, step)
    };
    let mut h = step;
    let mut c = cost(&best);
    while h > 1e-12 {
        let mut improved = false;
        for k in 0..best.len() {
            for s in [-h, h] {
                let mut cand = best.clone();
                cand[k] += s;
                let cc = cost(&cand);
                if cc < c {
                    best = cand;
                    c = cc;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (sphere_point(&best, radius), c)
}

// ---------------------------------------------------------------------------
// derivative checks

/// A loss whose `g1` is off by a relative 1e-3. Exists so the derivative
/// check can be shown to catch a broken implementation.
#[derive(Debug, Clone, Copy)]
pub struct CorruptedLoss(pub LossFamily);

impl PredictorLoss for CorruptedLoss {
    fn value(&self, xi: f64, y: f64) -> CoreResult<f64> {
        self.0.value(xi, y)
    }

    fn g1(&self, xi: f64, y: f64) -> CoreResult<f64> {
        Ok(self.0.g1(xi, y)? * 1.001)
    }

    fn g2(&self, xi: f64, y: f64) -> CoreResult<f64> {
        self.0.g2(xi, y)
    }
}

pub const DERIVATIVE_POINTS: usize = 10_000;
pub const DERIVATIVE_TOL: f64 = 1e-5;

pub fn saturated_family() -> LossFamily {
    LossFamily::Saturated {
        lower: -1.0,
        upper: 1.0,
        floor: -1.0,
        ceiling: 1.0,
    }
}

/// Random admissible `(ξ, y)` for `family`, with `ξ ∈ [−8, 8]`.
pub fn admissible_point(family: &LossFamily, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let xi = rng.random_range(-8.0..8.0);
    let y = match family {
        LossFamily::Linear => rng.random_range(-5.0..5.0),
        LossFamily::Logistic => rng.random_range(0.0..=1.0),
        LossFamily::Saturated {
            lower,
            upper,
            floor,
            ceiling,
        } => match rng.random_range(0..3) {
            0 => *floor,
            1 => *ceiling,
            _ => loop {
                let y = rng.random_range(*lower..*upper);
                if y != *floor && y != *ceiling {
                    break y;
                }
            },
        },
    };
    (xi, y)
}

/// Largest relative finite-difference error of `g1` and `g2`, with the
/// relative error measured as `|fd − analytic| / max(1, |analytic|)`.
pub fn max_derivative_error(
    loss: &dyn PredictorLoss,
    family: &LossFamily,
    points: usize,
    seed: u64,
) -> CoreResult<(f64, f64)> {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let (xi, y) = admissible_point(family, &mut rng);
        let fd1 = (loss.value(xi + h, y)? - loss.value(xi - h, y)?) / (2.0 * h);
        let fd2 = (loss.g1(xi + h, y)? - loss.g1(xi - h, y)?) / (2.0 * h);
        let g1 = loss.g1(xi, y)?;
        let g2 = loss.g2(xi, y)?;
        e1 = e1.max((fd1 - g1).abs() / g1.abs().max(1.0));
        e2 = e2.max((fd2 - g2).abs() / g2.abs().max(1.0));
    }
    Ok((e1, e2))
}

pub fn check_derivatives() -> CheckOutcome {
    timed("derivative_correctness", || {
        let mut parts = Vec::new();
        let mut ok = true;
        for (seed, fam) in [LossFamily::Linear, LossFamily::Logistic, saturated_family()]
            .into_iter()
            .enumerate()
        {
            let (e1, e2) = max_derivative_error(&fam, &fam, DERIVATIVE_POINTS, seed as u64)?;
            ok &= e1 <= DERIVATIVE_TOL && e2 <= DERIVATIVE_TOL;
            parts.push(format!("{} g1 {e1:.1e} g2 {e2:.1e}", fam.name()));
        }
        Ok((ok, format!("{} (tol {DERIVATIVE_TOL:.0e})", parts.join("; "))))
    })
}

/// Passes when the derivative check *rejects* a corrupted loss.
pub fn check_mutation_detected() -> CheckOutcome {
    timed("derivative_check_catches_fault", || {
        let mut caught = Vec::new();
        for fam in [LossFamily::Linear, LossFamily::Logistic, saturated_family()] {
            let (e1, _) = max_derivative_error(&CorruptedLoss(fam), &fam, DERIVATIVE_POINTS, 99)?;
            caught.push((fam.name(), e1 > DERIVATIVE_TOL, e1));
        }
        let ok = caught.iter().all(|c| c.1);
        let detail = caught
            .iter()
            .map(|(n, _, e)| format!("{n} g1 error {e:.1e}"))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((ok, detail))
    })
}

// ---------------------------------------------------------------------------
// exact equivalences

fn equivalence_stream(num_tasks: usize, seed: u64) -> CoreResult<Vec<TaskData>> {
    let spec = StreamSpec {
        case: CaseSpec::Shared {
            w_star: Vector::from_vec(vec![1.0, -0.5, 0.25, 2.0, -1.5]),
        },
        dim: 5,
        num_tasks,
        samples_per_task: 20,
        family: LossFamily::Linear,
        regime: FeatureRegime::GaussianIid {
            covariance: (0..5)
                .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        },
        noise: NoiseSpec::Gaussian { sigma: 0.3 },
        logistic_observation: LogisticObservation::default(),
        order: TaskOrder::Sequential,
        seed,
    };
    Ok(build_stream(&spec)?.tasks)
}

pub fn check_recursive_batch() -> CheckOutcome {
    timed("recursive_batch_equivalence", || {
        let mut worst = 0.0f64;
        for seed in CHECK_SEEDS {
            let tasks = equivalence_stream(50, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBE7A);
            let betas: Vec<f64> = (0..tasks.len()).map(|_| 1.0 - rng.random::<f64>()).collect();
            let cfg = Alg2Config {
                delta: 0.0,
                weights: Some(betas.clone()),
            };
            let mut s = LearnerState::initial(5);
            for (k, t) in tasks.iter().enumerate() {
                s = alg2_update(&s, t, cfg.beta(k + 1)?)?;
            }
            let oracle = weighted_ridge_oracle(&tasks, &betas);
            let diff: f64 = s.w.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = oracle.iter().map(|o| o * o).sum::<f64>().sqrt();
            worst = worst.max(diff / scale);
        }
        Ok((worst <= 1e-8, format!("max relative error {worst:.2e} (tol 1e-8)")))
    })
}

pub fn check_alg_equivalence() -> CheckOutcome {
    timed("alg1_alg2_linear_equivalence", || {
        let cfg = Alg1Config {
            mu: 1.0,
            radius: 1e6,
            family: LossFamily::Linear,
        };
        let mut worst = 0.0f64;
        for seed in CHECK_SEEDS {
            let tasks = equivalence_stream(100, seed)?;
            let (mut a, mut b) = (LearnerState::initial(5), LearnerState::initial(5));
            for t in &tasks {
                a = alg1_update(&a, t, &cfg)?;
                b = alg2_update(&b, t, 1.0)?;
                for (x, y) in a.w.iter().zip(b.w.iter()) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Ok((worst <= 1e-10, format!("max coordinate gap {worst:.2e} (tol 1e-10)")))
    })
}

pub const PROJECTION_INSTANCES: usize = 1000;

pub fn check_projection() -> CheckOutcome {
    timed("projection_optimality", || {
        let results: Vec<CoreResult<(f64, f64, bool)>> = thread_pool().install(|| {
            (0..PROJECTION_INSTANCES as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(0x9E0 + i);
                    let d = if i % 2 == 0 { 2 } else { 3 };
                    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
                    let x: Vec<f64> = (0..d).map(|_| 2.0 * normal()).collect();
                    let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal()).collect()).collect();
                    let mut q = vec![vec![0.0; d]; d];
                    for r in 0..d {
                        for c in 0..d {
                            q[r][c] = (0..d).map(|k| a[r][k] * a[c][k]).sum::<f64>() + if r == c { 0.1 } else { 0.0 };
                        }
                    }
                    let radius = rng.random_range(0.2..3.0);
                    let p = project_q_ball(&Vector::from_vec(x.clone()), &SymMatrix::from_rows(&q)?, radius)?;
                    let ours = {
                        let diff: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
                        quad_form(&diff, &q)
                    };
                    let inside = x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius;
                    let best = if inside {
                        0.0
                    } else {
                        sphere_grid_oracle(&x, &q, radius).1
                    };
                    Ok((ours - best, p.norm() - radius, inside))
                })
                .collect()
        });
        let mut worst_gap = f64::NEG_INFINITY;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut interior = 0;
        for r in results {
            let (gap, excess, inside) = r?;
            worst_gap = worst_gap.max(gap);
            worst_excess = worst_excess.max(excess);
            interior += inside as usize;
        }
        Ok((
            worst_gap <= 1e-6 && worst_excess <= 1e-10,
            format!(
                "{PROJECTION_INSTANCES} instances ({interior} interior): max gap to grid oracle {worst_gap:.2e} (slack 1e-6), max ‖Π(x)‖ − M {worst_excess:.2e}"
            ),
        ))
    })
}

// ---------------------------------------------------------------------------
// rate experiments

pub const RATE_TASKS: usize = 5000;

/// Shared-parameter stream used by the rate checks.
pub fn case1_stream(family: LossFamily, regime: FeatureRegime, seed: u64) -> StreamSpec {
    let w_star = match family {
        LossFamily::Linear => vec![1.0, -0.5, 0.25, 0.75, -1.0],
        _ => vec![0.6, -0.5, 0.4, 0.7, -0.5],
    };
    StreamSpec {
        case: CaseSpec::Shared {
            w_star: Vector::from_vec(w_star),
        },
        dim: 5,
        num_tasks: RATE_TASKS,
        samples_per_task: 10,
        family,
        regime,
        noise: NoiseSpec::Gaussian { sigma: 0.5 },
        logistic_observation: LogisticObservation::Bernoulli,
        order: TaskOrder::Sequential,
        seed,
    }
}

/// Alg1 config for [`case1_stream`]. The linear family uses the default
/// radius; the others use `M = 2`, which keeps `C = L·M` small enough for a
/// usable gain.
pub fn case1_config(family: LossFamily, regime: FeatureRegime) -> Result<ResolvedConfig> {
    let stream = case1_stream(family, regime, CHECK_SEEDS[0]);
    let learner = match family {
        LossFamily::Linear => Alg1Config {
            mu: 1.0,
            radius: conlearn_core::algorithms::default_radius(stream.parameter_bound()),
            family,
        },
        _ => Alg1Config::with_default_mu(family, 2.0, 1.0)?,
    };
    Ok(ResolvedConfig {
        checkpoints: Checkpoints::Auto.stages(stream.num_tasks),
        stream,
        learner: ResolvedLearner::Alg1(learner),
        output: Default::default(),
        replicate_seeds: CHECK_SEEDS.to_vec(),
    })
}

fn run_all(cfg: &ResolvedConfig) -> Result<Vec<RunResult>> {
    thread_pool().install(|| {
        cfg.replicate_seeds
            .par_iter()
            .map(|&s| run_replicate(cfg, s))
            .collect()
    })
}

fn bounded() -> FeatureRegime {
    FeatureRegime::BoundedUniform { radius: 1.0 }
}

fn low_excitation() -> FeatureRegime {
    FeatureRegime::LowExcitation {
        radius: 1.0,
        exponent: 0.6,
    }
}

/// `‖w̃_t‖²·λ_min(t)/log t` over `t ∈ [100, m]`.
fn trend_ratio(records: &[MetricsRecord]) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.t >= 100)
        .map(|r| r.est_err_sq * r.lambda_min / (r.t as f64).ln())
        .collect()
}

pub fn check_trend_case1() -> CheckOutcome {
    timed("convergence_trend_case1", || {
        let runs = run_all(&case1_config(LossFamily::Linear, bounded())?)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for r in &runs {
            let ratio = trend_ratio(&r.records);
            let max = ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let med = median(ratio).unwrap_or(f64::NAN);
            let fin = r.records.last().map_or(f64::NAN, |x| x.est_err_sq);
            ok &= max <= 10.0 * med && fin <= 1e-3;
            parts.push(format!("seed {}: max/median {:.2}, final {fin:.2e}", r.seed, max / med));
        }
        Ok((ok, format!("{} (bounds 10, 1e-3)", parts.join("; "))))
    })
}

pub fn check_weak_excitation() -> CheckOutcome {
    timed("convergence_weak_excitation", || {
        let runs = run_all(&case1_config(LossFamily::Linear, low_excitation())?)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for r in &runs {
            let last = r.records.last().copied();
            let fin = last.map_or(f64::NAN, |x| x.est_err_sq);
            let lam = last.map_or(f64::NAN, |x| x.lambda_min);
            ok &= fin <= 1e-2;
            parts.push(format!(
                "seed {}: final {fin:.2e}, log m/λ_min {:.2e}",
                r.seed,
                (RATE_TASKS as f64).ln() / lam
            ));
        }
        Ok((ok, format!("{} (bound 1e-2)", parts.join("; "))))
    })
}

/// Median across runs of the fitted exponent of `series`; runs whose fit is
/// undefined are listed with the reason and make the check fail.
fn median_exponent(
    runs: &[RunResult],
    series: &str,
    lo: f64,
    hi: f64,
) -> (bool, String) {
    let mut exps = Vec::new();
    let mut undefined = Vec::new();
    for r in runs {
        match (r.rate_fits.get(series), r.fit_errors.get(series)) {
            (Some(f), _) => exps.push(f.exponent),
            (None, reason) => undefined.push(format!("seed {}: {}", r.seed, reason.map_or("no fit", |s| s))),
        }
    }
    let shown: Vec<String> = exps.iter().map(|e| format!("{e:.3}")).collect();
    match median(exps) {
        Some(m) if undefined.is_empty() => (
            (lo..=hi).contains(&m),
            format!("{series} median exponent {m:.3} in [{lo}, {hi}]? per seed [{}]", shown.join(", ")),
        ),
        _ => (
            false,
            format!(
                "{series} fit undefined on {} of {} seeds ({})",
                undefined.len(),
                runs.len(),
                undefined.join("; ")
            ),
        ),
    }
}

/// Exponent of `|series|` over the trailing half, for diagnostics only.
fn abs_exponent(r: &RunResult, f: fn(&MetricsRecord) -> f64) -> Option<f64> {
    let s: Vec<(f64, f64)> = r.records.iter().map(|x| (x.t as f64, f(x).abs())).collect();
    rate_fit(&s, Window::TrailingHalf).ok().map(|f| f.exponent)
}

pub fn check_regret_rate_linear() -> CheckOutcome {
    timed("regret_rate_linear", || {
        let runs = run_all(&case1_config(LossFamily::Linear, bounded())?)?;
        Ok(median_exponent(&runs, "regret_excess", -1.3, -0.7))
    })
}

pub fn check_forgetting_rate_linear() -> CheckOutcome {
    timed("forgetting_rate_linear", || {
        let runs = run_all(&case1_config(LossFamily::Linear, bounded())?)?;
        let (ok, mut detail) = median_exponent(&runs, "forgetting_excess", -0.8, -0.3);
        let negative: usize = runs
            .iter()
            .map(|r| {
                r.records
                    .iter()
                    .filter(|x| x.t * 2 >= RATE_TASKS && x.forgetting - x.l_star <= 0.0)
                    .count()
            })
            .sum();
        let abs: Vec<String> = runs
            .iter()
            .map(|r| abs_exponent(r, |x| x.forgetting - x.l_star).map_or("n/a".into(), |e| format!("{e:.3}")))
            .collect();
        detail.push_str(&format!(
            "; nonpositive F_t − ℒ*_t at {negative} trailing-half checkpoints; exponent of |F_t − ℒ*_t| [{}]",
            abs.join(", ")
        ));
        Ok((ok, detail))
    })
}

pub fn check_regret_rate_logistic() -> CheckOutcome {
    timed("regret_rate_logistic", || {
        let runs = run_all(&case1_config(LossFamily::Logistic, bounded())?)?;
        Ok(median_exponent(&runs, "regret_excess", -1.3, -0.6))
    })
}

pub fn check_regret_rate_saturated() -> CheckOutcome {
    timed("regret_rate_saturated", || {
        let runs = run_all(&case1_config(saturated_family(), bounded())?)?;
        Ok(median_exponent(&runs, "regret_excess", -1.3, -0.6))
    })
}

/// Drifting linear stream around the demo metas with bounded features.
pub fn case2_config() -> ResolvedConfig {
    let stream = StreamSpec {
        case: CaseSpec::Drifting {
            metas: DEMO_METAS.iter().map(|m| Vector::from_vec(m.to_vec())).collect(),
            perturbation_sigma: 0.5,
            assignment: GroupAssignment::Uniform,
        },
        dim: 2,
        num_tasks: RATE_TASKS,
        samples_per_task: 10,
        family: LossFamily::Linear,
        regime: bounded(),
        noise: NoiseSpec::Gaussian { sigma: 0.2 },
        logistic_observation: LogisticObservation::default(),
        order: TaskOrder::Random { seed: 7 },
        seed: CHECK_SEEDS[0],
    };
    ResolvedConfig {
        checkpoints: Checkpoints::Auto.stages(stream.num_tasks),
        stream,
        learner: ResolvedLearner::Alg2(Alg2Config::default()),
        output: Default::default(),
        replicate_seeds: CHECK_SEEDS.to_vec(),
    }
}

pub fn check_drifting_rates() -> CheckOutcome {
    timed("drifting_case_rates", || {
        let runs = run_all(&case2_config())?;
        let mut ok = true;
        let mut parts = Vec::new();
        for r in &runs {
            let fin = r.final_state.w.distance_sq(&analytic_target());
            let dominated = r.records.iter().all(|x| x.p_star <= x.l_star);
            ok &= fin <= 1e-2 && dominated;
            parts.push(format!("seed {}: final {fin:.2e}, P*≤L* {dominated}", r.seed));
        }
        let (rate_ok, rate) = median_exponent(&runs, "regret_excess", -1.3, -0.7);
        Ok((ok && rate_ok, format!("{}; {rate}", parts.join("; "))))
    })
}

// ---------------------------------------------------------------------------
// demo and reproducibility

/// Distances to the analytic target of each run's final estimate.
pub fn demo_final_distances(order: DemoOrder, learner: DemoLearner) -> Result<Vec<RunResult>> {
    run_all(&demo_config(&DEMO_SEEDS, order, learner, Default::default()))
}

/// Stages among the last 50 at which the estimate is farther than 0.5 from the target.
pub fn far_stages(run: &RunResult, target: &Vector) -> usize {
    let n = run.trajectory.len();
    run.trajectory[n.saturating_sub(50)..]
        .iter()
        .filter(|w| w.distance_sq(target).sqrt() > 0.5)
        .count()
}

pub fn check_drifting_demo() -> CheckOutcome {
    timed("drifting_demo_reproduction", || {
        let target = analytic_target();
        let quoted = Vector::from_vec(QUOTED_TARGET.to_vec());
        let mut alg2_ok = [true; 5];
        let mut sgd_ok = [true; 5];
        let mut parts = Vec::new();
        for order in [DemoOrder::Sequential, DemoOrder::Random] {
            let alg2 = demo_final_distances(order, DemoLearner::Alg2)?;
            let sgd = demo_final_distances(order, DemoLearner::Sgd)?;
            let d: Vec<String> = alg2
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let dist = r.final_state.w.distance_sq(&target).sqrt();
                    alg2_ok[i] &= dist < 0.2;
                    format!("{dist:.3}/{:.3}", r.final_state.w.distance_sq(&quoted).sqrt())
                })
                .collect();
            let f: Vec<String> = sgd
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let n = far_stages(r, &target);
                    sgd_ok[i] &= n >= 10;
                    n.to_string()
                })
                .collect();
            parts.push(format!(
                "{order:?}: alg2 distance analytic/quoted [{}], sgd far stages [{}]",
                d.join(", "),
                f.join(", ")
            ));
        }
        let a = alg2_ok.iter().filter(|&&b| b).count();
        let s = sgd_ok.iter().filter(|&&b| b).count();
        Ok((
            a >= 4 && s >= 4,
            format!("alg2 ok on {a}/5 seeds, sgd oscillates on {s}/5; {}", parts.join("; ")),
        ))
    })
}

/// CSV bytes for one replicate, rendered in memory.
pub fn metrics_bytes(cfg: &ResolvedConfig, seed: u64) -> Result<Vec<u8>> {
    let r = run_replicate(cfg, seed)?;
    let mut buf = Vec::new();
    write_metrics(&mut buf, &r.records, r.learner, r.seed)?;
    Ok(buf)
}

pub fn check_reproducibility() -> CheckOutcome {
    timed("reproducibility", || {
        let mut cfgs = vec![
            demo_config(&[3], DemoOrder::Random, DemoLearner::Alg2, Default::default()),
            demo_config(&[3], DemoOrder::Sequential, DemoLearner::Sgd, Default::default()),
        ];
        let mut small = case1_config(LossFamily::Logistic, low_excitation())?;
        small.stream.num_tasks = 300;
        small.checkpoints = Checkpoints::Auto.stages(300);
        cfgs.push(small);
        let mut same = 0;
        for cfg in &cfgs {
            let a = metrics_bytes(cfg, 3)?;
            let b = metrics_bytes(cfg, 3)?;
            same += (a == b && !a.is_empty()) as usize;
        }
        Ok((
            same == cfgs.len(),
            format!("{same}/{} configs byte-identical across two runs", cfgs.len()),
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

pub fn quick_checks() -> Vec<fn() -> CheckOutcome> {
    vec![
        check_derivatives,
        check_mutation_detected,
        check_recursive_batch,
        check_alg_equivalence,
        check_projection,
        check_reproducibility,
    ]
}

pub fn full_checks() -> Vec<fn() -> CheckOutcome> {
    let mut v = quick_checks();
    v.extend([
        check_trend_case1 as fn() -> CheckOutcome,
        check_weak_excitation,
        check_regret_rate_linear,
        check_forgetting_rate_linear,
        check_regret_rate_logistic,
        check_regret_rate_saturated,
        check_drifting_rates,
        check_drifting_demo,
    ]);
    v
}

/// Run a verification level, calling `report` as each check finishes.
pub fn verify_suite(level: Level, mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let checks = match level {
        Level::Quick => quick_checks(),
        Level::Full => full_checks(),
    };
    checks
        .into_iter()
        .map(|c| {
            let o = c();
            report(&o);
            o
        })
        .collect()
}
