//! Drive a learner over a stream and log metrics at checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use conlearn_core::algorithms::{alg1_update, alg2_update, sgd_update, LearnerState, SgdStatus};
use conlearn_core::metrics::{
    forgetting, rate_fit, LambdaMinAccumulator, MetricsRecord, RateFit, StageAverage, Window,
};
use conlearn_core::numkit::min_eigenvalue;
use conlearn_core::streams::{build_stream, CaseSpec, TaskStream};
use conlearn_core::{LossFamily, Vector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ResolvedConfig, ResolvedLearner};
use crate::error::{HarnessError, Result};
use crate::output::{metrics_file_name, trajectory_file_name, write_json, write_metrics_csv, write_trajectory_csv};

/// Environment variable capping replicate parallelism.
pub const THREADS_ENV: &str = "CONLEARN_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub learner: &'static str,
    /// Sorted by `t`, one per checkpoint reached.
    pub records: Vec<MetricsRecord>,
    /// Estimate after every stage, starting with `w₀`.
    pub trajectory: Vec<Vector>,
    pub final_state: LearnerState,
    pub w_star: Vector,
    pub rate_fits: BTreeMap<String, RateFit>,
    /// Series whose fit was impossible, with the reason.
    pub fit_errors: BTreeMap<String, String>,
    pub status: RunStatus,
}

impl RunResult {
    pub fn final_distance(&self) -> f64 {
        self.final_state.w.distance_sq(&self.w_star).sqrt()
    }
}

/// Run `learner` over an already built stream.
pub fn run_on_stream(
    stream: &TaskStream,
    family: &LossFamily,
    learner: &ResolvedLearner,
    checkpoints: &[usize],
    seed: u64,
) -> Result<RunResult> {
    let dim = stream.w_star.dim();
    let mut state = LearnerState::initial(dim);
    let mut regret = StageAverage::new();
    let mut l_star = StageAverage::new();
    let mut p_star = StageAverage::new();
    let mut lambda = LambdaMinAccumulator::new(dim);
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut trajectory = Vec::with_capacity(stream.len() + 1);
    trajectory.push(state.w.clone());
    let mut status = RunStatus::Completed;
    let mut next_cp = checkpoints.iter().peekable();

    for (k, task) in stream.tasks.iter().enumerate() {
        let stage = k + 1;
        regret.observe(stage, &state.w, task, family)?;
        l_star.observe(stage, &stream.w_star, task, family)?;
        p_star.observe(stage, &task.w_true, task, family)?;
        lambda.add_task(task)?;

        state = match learner {
            ResolvedLearner::Alg1(cfg) => alg1_update(&state, task, cfg)?,
            ResolvedLearner::Alg2(cfg) => alg2_update(&state, task, cfg.beta(stage)?)?,
            ResolvedLearner::Sgd(cfg) => {
                let (w, s) = sgd_update(&state.w, task, cfg)?;
                if s == SgdStatus::Diverged {
                    status = RunStatus::Diverged;
                }
                LearnerState {
                    w,
                    q: state.q,
                    t: stage,
                }
            }
        };
        trajectory.push(state.w.clone());
        if status == RunStatus::Diverged {
            break;
        }

        while next_cp.peek().is_some_and(|&&c| c < stage) {
            next_cp.next();
        }
        if next_cp.peek() == Some(&&stage) {
            next_cp.next();
            records.push(MetricsRecord {
                t: stage,
                est_err_sq: state.w.distance_sq(&stream.w_star),
                forgetting: forgetting(&state.w, &stream.tasks[..stage], family)?,
                regret: regret.value(),
                lambda_min: lambda.value()?,
                q_lambda_min: min_eigenvalue(&state.q)?,
                l_star: l_star.value(),
                p_star: p_star.value(),
            });
        }
    }

    let (rate_fits, fit_errors) = fit_rates(&records);
    Ok(RunResult {
        seed,
        learner: learner.name(),
        records,
        trajectory,
        final_state: state,
        w_star: stream.w_star.clone(),
        rate_fits,
        fit_errors,
        status,
    })
}

/// Series fitted for every run, as `(name, t ↦ value)`.
pub fn rate_series(records: &[MetricsRecord]) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let pick = |f: fn(&MetricsRecord) -> f64| records.iter().map(|r| (r.t as f64, f(r))).collect();
    vec![
        ("est_err_sq", pick(|r| r.est_err_sq)),
        ("regret_excess", pick(|r| r.regret - r.l_star)),
        ("forgetting_excess", pick(|r| r.forgetting - r.l_star)),
    ]
}

/// Trailing-half log-log fits of [`rate_series`].
pub fn fit_rates(records: &[MetricsRecord]) -> (BTreeMap<String, RateFit>, BTreeMap<String, String>) {
    let mut fits = BTreeMap::new();
    let mut errors = BTreeMap::new();
    for (name, series) in rate_series(records) {
        match rate_fit(&series, Window::TrailingHalf) {
            Ok(f) => {
                fits.insert(name.to_string(), f);
            }
            Err(e) => {
                errors.insert(name.to_string(), e.to_string());
            }
        }
    }
    (fits, errors)
}

/// Build the stream for `seed` and run the configured learner on it.
pub fn run_replicate(cfg: &ResolvedConfig, seed: u64) -> Result<RunResult> {
    let mut spec = cfg.stream.clone();
    spec.seed = seed;
    let stream = build_stream(&spec)?;
    run_on_stream(&stream, &spec.family, &cfg.learner, &cfg.checkpoints, seed)
}

/// Thread pool sized by `CONLEARN_THREADS` (all cores when unset or invalid).
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction")
}

/// Run every replicate seed, in parallel, returning results in seed order.
pub fn run_replicates(cfg: &ResolvedConfig) -> Result<Vec<RunResult>> {
    thread_pool().install(|| {
        cfg.replicate_seeds
            .par_iter()
            .map(|&seed| run_replicate(cfg, seed))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub seed: u64,
    pub status: RunStatus,
    pub final_t: usize,
    pub final_w: Vector,
    pub final_est_err_sq: f64,
    pub rate_fits: BTreeMap<String, RateFit>,
    pub fit_errors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub learner: String,
    pub family: String,
    pub w_star: Vector,
    /// Meta parameters of a drifting stream.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metas: Option<Vec<Vector>>,
    pub replicates: Vec<ReplicateSummary>,
    /// Median exponent across replicates, per fitted series.
    pub median_exponents: BTreeMap<String, f64>,
}

pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

pub fn summarize(cfg: &ResolvedConfig, runs: &[RunResult]) -> Summary {
    let mut names: Vec<String> = runs.iter().flat_map(|r| r.rate_fits.keys().cloned()).collect();
    names.sort();
    names.dedup();
    let median_exponents = names
        .into_iter()
        .filter_map(|n| {
            let xs: Vec<f64> = runs.iter().filter_map(|r| r.rate_fits.get(&n)).map(|f| f.exponent).collect();
            median(xs).map(|m| (n, m))
        })
        .collect();
    Summary {
        learner: cfg.learner.name().to_string(),
        family: cfg.stream.family.name().to_string(),
        w_star: cfg.stream.target(),
        metas: match &cfg.stream.case {
            CaseSpec::Drifting { metas, .. } => Some(metas.clone()),
            CaseSpec::Shared { .. } => None,
        },
        replicates: runs
            .iter()
            .map(|r| ReplicateSummary {
                seed: r.seed,
                status: r.status,
                final_t: r.final_state.t,
                final_w: r.final_state.w.clone(),
                final_est_err_sq: r.final_state.w.distance_sq(&r.w_star),
                rate_fits: r.rate_fits.clone(),
                fit_errors: r.fit_errors.clone(),
            })
            .collect(),
        median_exponents,
    }
}

/// Write metrics, trajectories, `summary.json` and `config_echo.json` under `cfg.output`.
pub fn write_outputs(cfg: &ResolvedConfig, runs: &[RunResult]) -> Result<Summary> {
    let dir = &cfg.output;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for r in runs {
        write_metrics_csv(&dir.join(metrics_file_name(r.seed)), &r.records, r.learner, r.seed)?;
        write_trajectory_csv(&dir.join(trajectory_file_name(r.seed)), &r.trajectory)?;
    }
    let summary = summarize(cfg, runs);
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("config_echo.json"), cfg)?;
    Ok(summary)
}

/// Resolve-run-write in one step.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<(Vec<RunResult>, Summary)> {
    let runs = run_replicates(cfg)?;
    let summary = write_outputs(cfg, &runs)?;
    Ok((runs, summary))
}

/// Convenience for callers holding only a directory and a config.
pub fn with_output(cfg: &ResolvedConfig, dir: &Path) -> ResolvedConfig {
    ResolvedConfig {
        output: dir.to_path_buf(),
        ..cfg.clone()
    }
}
