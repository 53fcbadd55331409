//! Recursive estimators for continual learning of stochastic regression
//! models, together with the synthetic task streams and metrics used to
//! study them.
//!
//! * [`numkit`]: small dense linear algebra and normal-distribution helpers
//! * [`losses`]: loss families with their predictor derivatives
//! * [`models`]: single-task data generation
//! * [`streams`]: multi-task streams with shared or drifting parameters
//! * [`algorithms`]: the projected nonlinear learner, the gain-scheduled
//!   least-squares learner and an SGD fine-tuning baseline
//! * [`metrics`]: forgetting, regret, excitation and rate fits

pub mod algorithms;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod numkit;
pub mod streams;

pub use error::{Error, Result};
pub use losses::{CurvatureBounds, LossFamily};
pub use models::{FeatureRegime, NoiseSpec, TaskData};
pub use numkit::{SymMatrix, Vector};
