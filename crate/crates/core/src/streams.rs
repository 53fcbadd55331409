//! Multi-task streams.
//!
//! A stream is either *shared* (every task generated from one parameter) or
//! *drifting* (each task's parameter is a meta parameter plus Gaussian
//! perturbation). Task `k` of the construction order is always generated
//! from `SeedKey(seed, k)`, so reordering a stream never changes its data.

use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossFamily;
use crate::models::{
    generate_task_with, FeatureRegime, LogisticObservation, NoiseSpec, Purpose, SeedKey, TaskData,
};
use crate::numkit::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaseSpec {
    /// All tasks share `w_star`.
    Shared { w_star: Vector },
    /// Task parameters scatter around the mean of `metas`.
    Drifting {
        metas: Vec<Vector>,
        perturbation_sigma: f64,
        #[serde(default)]
        assignment: GroupAssignment,
    },
}

/// How drifting tasks are assigned to meta parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAssignment {
    /// Independent uniform choice per task.
    #[default]
    Uniform,
    /// Group sizes differ by at most one; labels are shuffled.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskOrder {
    /// Construction order; drifting streams are visited group by group.
    #[default]
    Sequential,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub case: CaseSpec,
    pub dim: usize,
    pub num_tasks: usize,
    pub samples_per_task: usize,
    pub family: LossFamily,
    pub regime: FeatureRegime,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub logistic_observation: LogisticObservation,
    #[serde(default)]
    pub order: TaskOrder,
    pub seed: u64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        self.family.validate()?;
        self.regime.validate(self.dim)?;
        self.noise.validate()?;
        match &self.case {
            CaseSpec::Shared { w_star } => {
                w_star.check_dim(self.dim)?;
                if !w_star.is_finite() {
                    return Err(Error::NonFinite("w_star"));
                }
            }
            CaseSpec::Drifting {
                metas,
                perturbation_sigma,
                ..
            } => {
                if metas.is_empty() {
                    return Err(Error::Empty("drifting stream needs at least one meta parameter"));
                }
                for m in metas {
                    m.check_dim(self.dim)?;
                    if !m.is_finite() {
                        return Err(Error::NonFinite("meta parameter"));
                    }
                }
                if !(perturbation_sigma.is_finite() && *perturbation_sigma >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "perturbation_sigma must be >= 0, got {perturbation_sigma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The fixed minimizer the stream is built around: `w_star` for shared
    /// streams, the equal-weight mean of the metas for drifting ones.
    pub fn target(&self) -> Vector {
        match &self.case {
            CaseSpec::Shared { w_star } => w_star.clone(),
            CaseSpec::Drifting { metas, .. } => {
                let k = metas.len() as f64;
                let mut mean = Vector::zeros(self.dim);
                for m in metas {
                    mean = mean.add_scaled(1.0 / k, m);
                }
                mean
            }
        }
    }

    /// Largest `‖w‖` the generator can produce deterministically (perturbation
    /// excluded).
    pub fn parameter_bound(&self) -> f64 {
        match &self.case {
            CaseSpec::Shared { w_star } => w_star.norm(),
            CaseSpec::Drifting { metas, .. } => {
                metas.iter().map(|m| m.norm()).fold(0.0, f64::max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    /// Tasks in visiting order.
    pub tasks: Vec<TaskData>,
    pub w_star: Vector,
    /// `w*_t` of each task, in visiting order.
    pub per_task_w: Vec<Vector>,
    /// Meta-parameter group of each task (0 for shared streams).
    pub groups: Vec<usize>,
    /// Construction index of each visited task.
    pub source_index: Vec<usize>,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

pub fn build_stream(spec: &StreamSpec) -> Result<TaskStream> {
    spec.validate()?;
    let m = spec.num_tasks;
    let (groups, params): (Vec<usize>, Vec<Vector>) = match &spec.case {
        CaseSpec::Shared { w_star } => (vec![0; m], vec![w_star.clone(); m]),
        CaseSpec::Drifting {
            metas,
            perturbation_sigma,
            assignment,
        } => {
            let k = metas.len();
            let groups: Vec<usize> = match assignment {
                GroupAssignment::Uniform => (0..m)
                    .map(|t| SeedKey::new(spec.seed, t as u64).rng(Purpose::Assignment).random_range(0..k))
                    .collect(),
                GroupAssignment::Balanced => {
                    let mut labels: Vec<usize> = (0..m).map(|t| t % k).collect();
                    labels.shuffle(&mut SeedKey::new(spec.seed, u64::MAX).rng(Purpose::Assignment));
                    labels
                }
            };
            let params = groups
                .iter()
                .enumerate()
                .map(|(t, &g)| {
                    let mut rng = SeedKey::new(spec.seed, t as u64).rng(Purpose::Parameter);
                    let bump: Vec<f64> = (0..spec.dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            perturbation_sigma * z
                        })
                        .collect();
                    metas[g].add_scaled(1.0, &bump)
                })
                .collect();
            (groups, params)
        }
    };

    let tasks: Vec<TaskData> = params
        .iter()
        .enumerate()
        .map(|(t, w)| {
            generate_task_with(
                &spec.family,
                w,
                spec.samples_per_task,
                &spec.regime,
                &spec.noise,
                spec.logistic_observation,
                SeedKey::new(spec.seed, t as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..m).collect();
    match spec.order {
        TaskOrder::Sequential => order.sort_by_key(|&t| groups[t]),
        TaskOrder::Random { seed } => {
            order.shuffle(&mut SeedKey::new(seed, spec.seed).rng(Purpose::Order));
        }
    }

    let mut slots: Vec<Option<TaskData>> = tasks.into_iter().map(Some).collect();
    let visited: Vec<TaskData> = order
        .iter()
        .map(|&t| slots[t].take().expect("permutation visits each task once"))
        .collect();
    Ok(TaskStream {
        per_task_w: visited.iter().map(|t| t.w_true.clone()).collect(),
        tasks: visited,
        w_star: spec.target(),
        groups: order.iter().map(|&t| groups[t]).collect(),
        source_index: order,
    })
}

/// The fixed parameter error is measured against.
pub fn effective_target(stream: &TaskStream) -> Vector {
    stream.w_star.clone()
}
