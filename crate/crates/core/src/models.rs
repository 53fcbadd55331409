//! Synthetic single-task data: features under a chosen regime, zero-mean
//! noise, and outputs produced through the loss family's generative rule.
//!
//! All randomness comes from [`SeedKey`], a counter-style key of
//! (experiment seed, task index). Each purpose (features, noise, ...) gets
//! its own ChaCha stream, so regenerating task `k` never depends on which
//! other tasks were generated before it.

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{sigmoid, LossFamily};
use crate::numkit::{Cholesky, SymMatrix, Vector};

/// One task's batch of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub features: Vec<Vector>,
    pub outputs: Vec<f64>,
    /// Parameter the task was generated from.
    pub w_true: Vector,
    /// `Σᵢ z_i` for this task, kept for moment diagnostics.
    pub noise_sum: f64,
}

impl TaskData {
    pub fn empty(w_true: Vector) -> Self {
        TaskData {
            features: Vec::new(),
            outputs: Vec::new(),
            w_true,
            noise_sum: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.w_true.dim()
    }

    pub fn samples(&self) -> impl Iterator<Item = (&Vector, f64)> + '_ {
        self.features.iter().zip(self.outputs.iter().copied())
    }

    /// Checks lengths, dimensions and finiteness.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.features.len() != self.outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                found: self.outputs.len(),
            });
        }
        for x in &self.features {
            x.check_dim(dim)?;
            if !x.is_finite() {
                return Err(Error::NonFinite("feature"));
            }
        }
        if self.outputs.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("output"));
        }
        Ok(())
    }
}

/// Zero-mean observation noise with a finite moment above order 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    UniformCentered { halfwidth: f64 },
    /// Student-t scaled by `scale`; `dof > 2` keeps the variance finite.
    StudentT { dof: f64, scale: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseSpec::UniformCentered { halfwidth } => halfwidth.is_finite() && halfwidth >= 0.0,
            NoiseSpec::StudentT { dof, scale } => {
                dof.is_finite() && dof > 2.0 && scale.is_finite() && scale >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid noise spec {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSpec::UniformCentered { halfwidth } => {
                if halfwidth == 0.0 {
                    0.0
                } else {
                    rng.random_range(-halfwidth..halfwidth)
                }
            }
            NoiseSpec::StudentT { dof, scale } => {
                // dof validated > 2
                let t = StudentT::new(dof).expect("validated dof");
                scale * t.sample(rng)
            }
        }
    }

    /// Standard deviation of a single draw.
    pub fn std_dev(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma } => sigma,
            NoiseSpec::UniformCentered { halfwidth } => halfwidth / 3.0_f64.sqrt(),
            NoiseSpec::StudentT { dof, scale } => scale * (dof / (dof - 2.0)).sqrt(),
        }
    }
}

/// How feature vectors are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureRegime {
    /// Uniform in the open ball of the given radius.
    BoundedUniform { radius: f64 },
    GaussianIid { covariance: Vec<Vec<f64>> },
    /// Every task repeats `e₁·radius/2`; with probability `t^(exponent−1)`
    /// task `t` instead draws all its samples from the bounded ball. The
    /// accumulated Gram matrix then has its smallest eigenvalue growing like
    /// `m^exponent`.
    LowExcitation { radius: f64, exponent: f64 },
}

impl FeatureRegime {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            FeatureRegime::BoundedUniform { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidParameter(format!("radius must be > 0, got {radius}")));
                }
            }
            FeatureRegime::GaussianIid { covariance } => {
                let cov = SymMatrix::from_rows(covariance)?;
                if cov.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: cov.dim(),
                    });
                }
                Cholesky::factor(&cov)?;
            }
            FeatureRegime::LowExcitation { radius, exponent } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidParameter(format!("radius must be > 0, got {radius}")));
                }
                if !(*exponent > 0.0 && *exponent < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "excitation exponent must lie in (0, 1), got {exponent}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Almost-sure bound on `‖x‖`, if the regime has one.
    pub fn feature_bound(&self) -> Option<f64> {
        match self {
            FeatureRegime::BoundedUniform { radius } | FeatureRegime::LowExcitation { radius, .. } => {
                Some(*radius)
            }
            FeatureRegime::GaussianIid { .. } => None,
        }
    }
}

/// Observation rule for the logistic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogisticObservation {
    /// `y ~ Bernoulli(σ(ξ))`.
    #[default]
    Bernoulli,
    /// `y = σ(ξ) + z` with `z` drawn from the noise spec and clamped to
    /// `±min(σ, 1 − σ)`. Symmetric clamping keeps `z` zero-mean.
    ClampedAdditive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Features,
    Noise,
    Excitation,
    Parameter,
    Assignment,
    Order,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Features => 0x243f_6a88_85a3_08d3,
            Purpose::Noise => 0x1319_8a2e_0370_7344,
            Purpose::Excitation => 0xa409_3822_299f_31d0,
            Purpose::Parameter => 0x082e_fa98_ec4e_6c89,
            Purpose::Assignment => 0x4528_21e6_38d0_1377,
            Purpose::Order => 0xbe54_66cf_34e9_0c6c,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based key for one task's random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedKey {
    pub seed: u64,
    pub task: u64,
}

impl SeedKey {
    pub fn new(seed: u64, task: u64) -> Self {
        SeedKey { seed, task }
    }

    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ purpose.tag()));
        rng.set_stream(self.task);
        rng
    }
}

fn draw_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / dim as f64);
        let x = Vector::from_vec(dir.iter().map(|v| v * r / norm).collect());
        if x.norm() < radius {
            return x;
        }
    }
}

/// Draws `n` feature vectors for task `key.task` (1-based stage `key.task + 1`).
pub fn draw_features(regime: &FeatureRegime, dim: usize, n: usize, key: SeedKey) -> Result<Vec<Vector>> {
    regime.validate(dim)?;
    let mut rng = key.rng(Purpose::Features);
    Ok(match regime {
        FeatureRegime::BoundedUniform { radius } => {
            (0..n).map(|_| draw_in_ball(&mut rng, dim, *radius)).collect()
        }
        FeatureRegime::GaussianIid { covariance } => {
            // x = L z with cov = L Lᵀ
            let chol = Cholesky::factor(&SymMatrix::from_rows(covariance)?)?;
            (0..n)
                .map(|_| {
                    let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    chol.mul_lower(&z)
                })
                .collect()
        }
        FeatureRegime::LowExcitation { radius, exponent } => {
            let stage = key.task as f64 + 1.0;
            let p = stage.powf(exponent - 1.0).min(1.0);
            let fired = key.rng(Purpose::Excitation).random::<f64>() < p;
            if fired {
                (0..n).map(|_| draw_in_ball(&mut rng, dim, *radius)).collect()
            } else {
                vec![Vector::basis(dim, 0, 0.5 * radius); n]
            }
        }
    })
}

/// Produces outputs for given features under the family's generative rule.
///
/// The saturated family always uses standard normal latent noise and ignores
/// `noise`; the logistic family ignores it under Bernoulli observation.
pub fn observe(
    family: &LossFamily,
    w_true: &Vector,
    features: Vec<Vector>,
    noise: &NoiseSpec,
    observation: LogisticObservation,
    key: SeedKey,
) -> Result<TaskData> {
    family.validate()?;
    noise.validate()?;
    if !w_true.is_finite() {
        return Err(Error::NonFinite("true parameter"));
    }
    let dim = w_true.dim();
    for x in &features {
        x.check_dim(dim)?;
    }
    let mut rng = key.rng(Purpose::Noise);
    let mut outputs = Vec::with_capacity(features.len());
    let mut noise_sum = 0.0;
    for x in &features {
        let xi = x.dot(w_true);
        let (y, z) = match *family {
            LossFamily::Linear => {
                let z = noise.sample(&mut rng);
                (xi + z, z)
            }
            LossFamily::Logistic => {
                let p = sigmoid(xi);
                match observation {
                    LogisticObservation::Bernoulli => {
                        let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                        (y, y - p)
                    }
                    LogisticObservation::ClampedAdditive => {
                        let cap = p.min(1.0 - p);
                        let z = noise.sample(&mut rng).clamp(-cap, cap);
                        ((p + z).clamp(0.0, 1.0), z)
                    }
                }
            }
            LossFamily::Saturated {
                lower,
                upper,
                floor,
                ceiling,
            } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                let s = xi + z;
                let y = if s <= lower {
                    floor
                } else if s >= upper {
                    ceiling
                } else {
                    s
                };
                (y, z)
            }
        };
        noise_sum += z;
        outputs.push(y);
    }
    Ok(TaskData {
        features,
        outputs,
        w_true: w_true.clone(),
        noise_sum,
    })
}

/// Generates one task: features from `regime`, outputs from `family`
/// with Bernoulli logistic observations.
pub fn generate_task(
    family: &LossFamily,
    w_true: &Vector,
    n: usize,
    regime: &FeatureRegime,
    noise: &NoiseSpec,
    key: SeedKey,
) -> Result<TaskData> {
    generate_task_with(family, w_true, n, regime, noise, LogisticObservation::default(), key)
}

pub fn generate_task_with(
    family: &LossFamily,
    w_true: &Vector,
    n: usize,
    regime: &FeatureRegime,
    noise: &NoiseSpec,
    observation: LogisticObservation,
    key: SeedKey,
) -> Result<TaskData> {
    let features = draw_features(regime, w_true.dim(), n, key)?;
    observe(family, w_true, features, noise, observation, key)
}

/// Empirical absolute moment `mean |s|^order`.
pub fn moment_check(samples: &[f64], order: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("moment samples"));
    }
    if !(order > 0.0) || !order.is_finite() {
        return Err(Error::InvalidParameter(format!("moment order must be > 0, got {order}")));
    }
    Ok(samples.iter().map(|s| s.abs().powf(order)).sum::<f64>() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::normal_cdf;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn empty_task() {
        let t = generate_task(
            &LossFamily::Linear,
            &Vector::zeros(3),
            0,
            &FeatureRegime::BoundedUniform { radius: 1.0 },
            &NoiseSpec::Gaussian { sigma: 1.0 },
            SeedKey::new(1, 0),
        )
        .unwrap();
        assert!(t.is_empty());
        assert_eq!(t.features.len(), 0);
    }

    #[test]
    fn noiseless_linear_output() {
        let t = observe(
            &LossFamily::Linear,
            &Vector::from_vec(vec![1.0, 0.0]),
            vec![Vector::from_vec(vec![2.0, 3.0])],
            &NoiseSpec::UniformCentered { halfwidth: 0.0 },
            LogisticObservation::Bernoulli,
            SeedKey::new(9, 3),
        )
        .unwrap();
        assert_eq!(t.outputs, vec![2.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = observe(
            &LossFamily::Linear,
            &Vector::zeros(2),
            vec![Vector::zeros(3)],
            &NoiseSpec::Gaussian { sigma: 1.0 },
            LogisticObservation::Bernoulli,
            SeedKey::new(0, 0),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let r = draw_features(
            &FeatureRegime::GaussianIid { covariance: vec![vec![1.0]] },
            2,
            1,
            SeedKey::new(0, 0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn saturated_censoring_fraction() {
        let fam = LossFamily::Saturated {
            lower: -1.0,
            upper: 1.0,
            floor: -1.0,
            ceiling: 1.0,
        };
        let t = generate_task(
            &fam,
            &Vector::zeros(2),
            100_000,
            &FeatureRegime::BoundedUniform { radius: 1.0 },
            &NoiseSpec::Gaussian { sigma: 1.0 },
            SeedKey::new(42, 0),
        )
        .unwrap();
        let censored: Vec<f64> = t
            .outputs
            .iter()
            .map(|&y| if y == -1.0 || y == 1.0 { 1.0 } else { 0.0 })
            .collect();
        let (m, se) = mean_and_se(&censored);
        let oracle = 2.0 * normal_cdf(-1.0);
        assert!((oracle - 0.3173).abs() < 1e-4);
        assert!((m - oracle).abs() < 3.0 * se, "{m} vs {oracle} (se {se})");
        for &y in &t.outputs {
            assert!(y == -1.0 || y == 1.0 || (-1.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn bounded_features_stay_inside_ball() {
        for key in 0..20 {
            let xs = draw_features(
                &FeatureRegime::BoundedUniform { radius: 0.7 },
                4,
                500,
                SeedKey::new(3, key),
            )
            .unwrap();
            assert!(xs.iter().all(|x| x.norm() < 0.7));
        }
    }

    #[test]
    fn generation_is_deterministic_and_keyed() {
        let make = |seed, task| {
            generate_task(
                &LossFamily::Logistic,
                &Vector::from_vec(vec![0.5, -1.0, 2.0]),
                50,
                &FeatureRegime::GaussianIid {
                    covariance: vec![vec![1.0, 0.2, 0.0], vec![0.2, 1.0, 0.0], vec![0.0, 0.0, 2.0]],
                },
                &NoiseSpec::Gaussian { sigma: 0.1 },
                SeedKey::new(seed, task),
            )
            .unwrap()
        };
        assert_eq!(make(7, 4), make(7, 4));
        assert_ne!(make(7, 4), make(7, 5));
        assert_ne!(make(7, 4), make(8, 4));
    }

    #[test]
    fn noise_is_centered_with_finite_moments() {
        let specs = [
            NoiseSpec::Gaussian { sigma: 0.7 },
            NoiseSpec::UniformCentered { halfwidth: 2.0 },
            NoiseSpec::StudentT { dof: 4.0, scale: 1.0 },
        ];
        for spec in specs {
            let mut rng = SeedKey::new(5, 0).rng(Purpose::Noise);
            let draws: Vec<f64> = (0..100_000).map(|_| spec.sample(&mut rng)).collect();
            let (m, se) = mean_and_se(&draws);
            assert!(m.abs() < 3.0 * se, "{spec:?}: mean {m}, se {se}");
            let m25 = moment_check(&draws, 2.5).unwrap();
            assert!(m25.is_finite() && m25 > 0.0);
        }
    }

    #[test]
    fn moment_check_examples() {
        assert_eq!(moment_check(&[0.0; 10], 3.0).unwrap(), 0.0);
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(moment_check(&alt, 2.0).unwrap(), 1.0);
        assert!(moment_check(&[], 2.0).is_err());
        assert!(moment_check(&[1.0], 0.0).is_err());

        let mut rng = SeedKey::new(77, 0).rng(Purpose::Noise);
        let draws: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sq: Vec<f64> = draws.iter().map(|z| z * z).collect();
        let (_, se) = mean_and_se(&sq);
        let m2 = moment_check(&draws, 2.0).unwrap();
        assert!((m2 - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn low_excitation_mostly_repeats_base_direction() {
        let regime = FeatureRegime::LowExcitation { radius: 1.0, exponent: 0.5 };
        let base = Vector::basis(3, 0, 0.5);
        let fired = (0..2000u64)
            .filter(|&t| {
                let xs = draw_features(&regime, 3, 4, SeedKey::new(1, t)).unwrap();
                xs[0] != base
            })
            .count();
        // Σ_{t ≤ 2000} t^{-1/2} ≈ 88
        assert!((50..130).contains(&fired), "fired {fired}");
        assert!(FeatureRegime::LowExcitation { radius: 1.0, exponent: 1.0 }.validate(3).is_err());
    }

    #[test]
    fn clamped_additive_logistic_stays_in_unit_interval() {
        let t = generate_task_with(
            &LossFamily::Logistic,
            &Vector::from_vec(vec![3.0, -3.0]),
            2000,
            &FeatureRegime::BoundedUniform { radius: 2.0 },
            &NoiseSpec::Gaussian { sigma: 1.0 },
            LogisticObservation::ClampedAdditive,
            SeedKey::new(2, 2),
        )
        .unwrap();
        assert!(t.outputs.iter().all(|y| (0.0..=1.0).contains(y)));
    }
}
