//! Experiment configuration.
//!
//! A config is one JSON document with `stream`, `learner`, `checkpoints`,
//! `output` and `replicate_seeds` sections. Unknown keys are rejected.
//! [`ExperimentConfig::resolve`] fills in every default and reports all
//! validation problems at once, each tagged with its field path.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use conlearn_core::algorithms::{default_radius, Alg1Config, Alg2Config, SgdConfig};
use conlearn_core::streams::{CaseSpec, StreamSpec};
use conlearn_core::LossFamily;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, HarnessError, Result};

/// Checkpoint count the automatic cadence aims for.
pub const AUTO_CHECKPOINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    pub output: PathBuf,
    /// Empty means "just `stream.seed`".
    #[serde(default)]
    pub replicate_seeds: Vec<u64>,
}

/// Learner section. The loss family always comes from the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Alg1 {
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    Alg2 {
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Sgd {
        #[serde(default)]
        lr: Option<f64>,
        #[serde(default)]
        passes: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Checkpoints {
    /// Every stage up to 200 tasks, otherwise every `⌈m/200⌉` stages.
    #[default]
    Auto,
    Every {
        stride: usize,
    },
    List {
        stages: Vec<usize>,
    },
}

impl Checkpoints {
    /// Sorted stages at which metrics are recorded; always includes `m`.
    pub fn stages(&self, m: usize) -> Vec<usize> {
        let stride = |s: usize| -> Vec<usize> {
            let mut v: Vec<usize> = (1..=m).filter(|t| t % s == 0).collect();
            if v.last() != Some(&m) && m > 0 {
                v.push(m);
            }
            v
        };
        match self {
            Checkpoints::Auto => stride(m.div_ceil(AUTO_CHECKPOINTS).max(1)),
            Checkpoints::Every { stride: s } => stride((*s).max(1)),
            Checkpoints::List { stages } => {
                let mut set: BTreeSet<usize> = stages.iter().copied().filter(|&t| t >= 1 && t <= m).collect();
                if m > 0 {
                    set.insert(m);
                }
                set.into_iter().collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedLearner {
    Alg1(Alg1Config),
    Alg2(Alg2Config),
    Sgd(SgdConfig),
}

impl ResolvedLearner {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedLearner::Alg1(_) => "alg1",
            ResolvedLearner::Alg2(_) => "alg2",
            ResolvedLearner::Sgd(_) => "sgd",
        }
    }
}

/// A config with every default filled in; this is what `config_echo.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub stream: StreamSpec,
    pub learner: ResolvedLearner,
    pub checkpoints: Vec<usize>,
    pub output: PathBuf,
    pub replicate_seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            HarnessError::config(path, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Validate and fill defaults. All problems are reported together.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut issues = Vec::new();
        validate_stream(&self.stream, &mut issues);
        let learner = resolve_learner(&self.learner, &self.stream, &mut issues);
        match &self.checkpoints {
            Checkpoints::Every { stride: 0 } => issues.push(ConfigIssue::new("checkpoints.stride", "must be >= 1")),
            Checkpoints::List { stages } if stages.iter().any(|&t| t == 0 || t > self.stream.num_tasks) => {
                issues.push(ConfigIssue::new(
                    "checkpoints.stages",
                    format!("stages must lie in 1..={}", self.stream.num_tasks),
                ))
            }
            _ => {}
        }
        if self.output.as_os_str().is_empty() {
            issues.push(ConfigIssue::new("output", "must be a directory path"));
        }
        let seeds = if self.replicate_seeds.is_empty() {
            vec![self.stream.seed]
        } else {
            self.replicate_seeds.clone()
        };
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            issues.push(ConfigIssue::new("replicate_seeds", "seeds must be distinct"));
        }
        match (issues.is_empty(), learner) {
            (true, Some(learner)) => Ok(ResolvedConfig {
                stream: self.stream.clone(),
                learner,
                checkpoints: self.checkpoints.stages(self.stream.num_tasks),
                output: self.output.clone(),
                replicate_seeds: seeds,
            }),
            _ => Err(HarnessError::Config(issues)),
        }
    }
}

fn validate_stream(s: &StreamSpec, issues: &mut Vec<ConfigIssue>) {
    let mut push = |path: &str, r: conlearn_core::Result<()>| {
        if let Err(e) = r {
            issues.push(ConfigIssue::new(path, e));
        }
    };
    if s.dim == 0 {
        push("stream.dim", Err(conlearn_core::Error::InvalidParameter("must be >= 1".into())));
        return;
    }
    if s.num_tasks == 0 {
        push(
            "stream.num_tasks",
            Err(conlearn_core::Error::InvalidParameter("must be >= 1".into())),
        );
    }
    push("stream.family", s.family.validate());
    push("stream.regime", s.regime.validate(s.dim));
    push("stream.noise", s.noise.validate());
    // the remaining stream checks only concern the case section
    if s.family.validate().is_ok() && s.regime.validate(s.dim).is_ok() && s.noise.validate().is_ok() {
        let path = match &s.case {
            CaseSpec::Shared { .. } => "stream.case.w_star",
            CaseSpec::Drifting { .. } => "stream.case",
        };
        push(path, s.validate());
    }
}

fn resolve_learner(spec: &LearnerSpec, stream: &StreamSpec, issues: &mut Vec<ConfigIssue>) -> Option<ResolvedLearner> {
    let family = stream.family;
    let before = issues.len();
    let resolved = match spec {
        LearnerSpec::Alg1 { mu, radius } => {
            let radius = radius.unwrap_or_else(|| default_radius(stream.parameter_bound()));
            if !(radius.is_finite() && radius > 0.0) {
                issues.push(ConfigIssue::new("learner.radius", format!("must be > 0, got {radius}")));
            }
            let mu = match (mu, family) {
                (Some(mu), _) => Some(*mu),
                (None, LossFamily::Linear) => Some(1.0),
                (None, _) => match stream.regime.feature_bound() {
                    Some(l) => conlearn_core::algorithms::default_mu(&family, l * radius)
                        .map_err(|e| issues.push(ConfigIssue::new("learner.mu", e)))
                        .ok(),
                    None => {
                        issues.push(ConfigIssue::new(
                            "learner.mu",
                            "required when features are unbounded and the family is not linear",
                        ));
                        None
                    }
                },
            };
            mu.map(|mu| {
                if !(mu.is_finite() && mu > 0.0) {
                    issues.push(ConfigIssue::new("learner.mu", format!("must be > 0, got {mu}")));
                }
                ResolvedLearner::Alg1(Alg1Config { mu, radius, family })
            })
        }
        LearnerSpec::Alg2 { delta, weights } => {
            if family != LossFamily::Linear {
                issues.push(ConfigIssue::new(
                    "learner.kind",
                    format!("alg2 requires the linear family, stream uses {}", family.name()),
                ));
            }
            let cfg = Alg2Config {
                delta: *delta,
                weights: weights.clone(),
            };
            if !(0.0..0.5).contains(delta) {
                issues.push(ConfigIssue::new("learner.delta", format!("must lie in [0, 0.5), got {delta}")));
            }
            if let Some(ws) = weights {
                if ws.len() < stream.num_tasks {
                    issues.push(ConfigIssue::new(
                        "learner.weights",
                        format!("need {} weights, got {}", stream.num_tasks, ws.len()),
                    ));
                } else if let Err(e) = cfg.validate() {
                    issues.push(ConfigIssue::new("learner.weights", e));
                }
            }
            Some(ResolvedLearner::Alg2(cfg))
        }
        LearnerSpec::Sgd { lr, passes } => {
            let mut cfg = SgdConfig::new(family);
            if let Some(lr) = lr {
                cfg.lr = *lr;
                if !(lr.is_finite() && *lr >= 0.0) {
                    issues.push(ConfigIssue::new("learner.lr", format!("must be >= 0, got {lr}")));
                }
            }
            if let Some(p) = passes {
                cfg.passes = *p;
                if *p == 0 {
                    issues.push(ConfigIssue::new("learner.passes", "must be >= 1"));
                }
            }
            Some(ResolvedLearner::Sgd(cfg))
        }
    };
    if issues.len() > before {
        None
    } else {
        resolved
    }
}
