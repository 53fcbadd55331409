//! Per-sample losses as functions of the linear predictor `ξ = xᵀw`.
//!
//! Each family provides the loss value together with its first and second
//! derivatives in `ξ` (called `g1` and `g2` throughout the crate). The
//! learners only ever touch a family through these three quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{log_normal_cdf, log_normal_pdf, mills_ratio};

/// Probability clamp for the cross-entropy logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossFamily {
    /// `½(ξ − y)²`
    Linear,
    /// Cross-entropy against a sigmoid mean, `y ∈ [0, 1]`.
    Logistic,
    /// Gaussian negative log-likelihood of a censored linear response.
    /// Latent values at or below `lower` are reported as `floor`, values at
    /// or above `upper` as `ceiling`.
    Saturated {
        lower: f64,
        upper: f64,
        floor: f64,
        ceiling: f64,
    },
}

/// Which branch of the saturated likelihood an observation falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Censoring {
    Below,
    Observed,
    Above,
}

/// Curvature interval `[mu_lower, mu_upper]` of `g2` over `|ξ| ≤ predictor_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub predictor_bound: f64,
}

/// Anything exposing a loss in the linear predictor with two derivatives.
/// The derivative checks in the harness are written against this trait so
/// that a deliberately broken implementation can be plugged in.
pub trait PredictorLoss {
    fn value(&self, xi: f64, y: f64) -> Result<f64>;
    fn g1(&self, xi: f64, y: f64) -> Result<f64>;
    fn g2(&self, xi: f64, y: f64) -> Result<f64>;
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `σ(x)(1 − σ(x))`, evaluated without cancellation.
fn sigmoid_slope(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `(x f(x) F(x) + f(x)²) / F(x)²` for the standard normal `f`, `F`.
///
/// Strictly decreasing from 1 (at −∞) to 0 (at +∞). It is the curvature of
/// the censored branches of the saturated loss.
pub fn saturation_h(x: f64) -> f64 {
    let r = mills_ratio(x);
    r * (x + r)
}

impl LossFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::Linear => "linear",
            LossFamily::Logistic => "logistic",
            LossFamily::Saturated { .. } => "saturated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LossFamily::Saturated {
            lower,
            upper,
            floor,
            ceiling,
        } = *self
        {
            if ![lower, upper, floor, ceiling].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("saturated thresholds"));
            }
            if !(lower < upper) {
                return Err(Error::InvalidParameter(format!(
                    "saturated family needs lower < upper, got {lower} >= {upper}"
                )));
            }
        }
        Ok(())
    }

    /// Classifies a saturated observation. Sentinels are matched by exact
    /// equality, floor first.
    pub fn censoring(&self, y: f64) -> Result<Censoring> {
        match *self {
            LossFamily::Saturated {
                lower,
                upper,
                floor,
                ceiling,
            } => {
                if y == floor {
                    Ok(Censoring::Below)
                } else if y == ceiling {
                    Ok(Censoring::Above)
                } else if (lower..=upper).contains(&y) {
                    Ok(Censoring::Observed)
                } else {
                    Err(Error::MalformedObservation {
                        y,
                        reason: format!(
                            "not a sentinel ({floor}, {ceiling}) and outside [{lower}, {upper}]"
                        ),
                    })
                }
            }
            _ => Ok(Censoring::Observed),
        }
    }

    fn check(&self, xi: f64, y: f64) -> Result<()> {
        if !xi.is_finite() {
            return Err(Error::NonFinite("predictor"));
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("observation"));
        }
        if let LossFamily::Logistic = self {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::MalformedObservation {
                    y,
                    reason: "logistic observations must lie in [0, 1]".into(),
                });
            }
        }
        Ok(())
    }

    pub fn loss_value(&self, xi: f64, y: f64) -> Result<f64> {
        self.check(xi, y)?;
        Ok(match *self {
            LossFamily::Linear => 0.5 * (xi - y) * (xi - y),
            LossFamily::Logistic => {
                let lo = PROB_CLAMP.ln();
                let hi = (-PROB_CLAMP).ln_1p();
                let log_p = (-softplus(-xi)).clamp(lo, hi);
                let log_q = (-softplus(xi)).clamp(lo, hi);
                -y * log_p - (1.0 - y) * log_q
            }
            LossFamily::Saturated { lower, upper, .. } => match self.censoring(y)? {
                Censoring::Below => -log_normal_cdf(lower - xi),
                Censoring::Observed => -log_normal_pdf(y - xi),
                Censoring::Above => -log_normal_cdf(xi - upper),
            },
        })
    }

    pub fn g1(&self, xi: f64, y: f64) -> Result<f64> {
        self.check(xi, y)?;
        Ok(match *self {
            LossFamily::Linear => xi - y,
            LossFamily::Logistic => sigmoid(xi) - y,
            LossFamily::Saturated { lower, upper, .. } => match self.censoring(y)? {
                Censoring::Below => mills_ratio(lower - xi),
                // f'(v)/f(v) = −v with v = y − ξ
                Censoring::Observed => xi - y,
                Censoring::Above => -mills_ratio(xi - upper),
            },
        })
    }

    pub fn g2(&self, xi: f64, y: f64) -> Result<f64> {
        self.check(xi, y)?;
        Ok(match *self {
            LossFamily::Linear => 1.0,
            LossFamily::Logistic => sigmoid_slope(xi),
            LossFamily::Saturated { lower, upper, .. } => match self.censoring(y)? {
                Censoring::Below => saturation_h(lower - xi),
                Censoring::Observed => 1.0,
                Censoring::Above => saturation_h(xi - upper),
            },
        })
    }

    /// Bounds on `g2` over `|ξ| ≤ c`, worst case over admissible `y`.
    pub fn curvature_bounds(&self, c: f64) -> Result<CurvatureBounds> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "predictor bound must be finite and >= 0, got {c}"
            )));
        }
        let (mu_lower, mu_upper) = match *self {
            LossFamily::Linear => (1.0, 1.0),
            LossFamily::Logistic => (sigmoid_slope(c), 0.25),
            LossFamily::Saturated { lower, upper, .. } => {
                self.validate()?;
                let below = |xi: f64| saturation_h(lower - xi);
                let above = |xi: f64| saturation_h(xi - upper);
                let (lo_b, hi_b) = grid_extrema(&below, c);
                let (lo_a, hi_a) = grid_extrema(&above, c);
                // the uncensored branch contributes curvature exactly 1
                (lo_b.min(lo_a).min(1.0), hi_b.max(hi_a).max(1.0))
            }
        };
        Ok(CurvatureBounds {
            mu_lower,
            mu_upper,
            predictor_bound: c,
        })
    }
}

impl PredictorLoss for LossFamily {
    fn value(&self, xi: f64, y: f64) -> Result<f64> {
        self.loss_value(xi, y)
    }
    fn g1(&self, xi: f64, y: f64) -> Result<f64> {
        LossFamily::g1(self, xi, y)
    }
    fn g2(&self, xi: f64, y: f64) -> Result<f64> {
        LossFamily::g2(self, xi, y)
    }
}

const GRID_STEP: f64 = 1e-3;

/// Min and max of `f` on `[-c, c]`: dense grid, then golden-section
/// refinement around the best grid points.
fn grid_extrema(f: &dyn Fn(f64) -> f64, c: f64) -> (f64, f64) {
    if c == 0.0 {
        let v = f(0.0);
        return (v, v);
    }
    let steps = (2.0 * c / GRID_STEP).ceil() as usize;
    let h = 2.0 * c / steps as f64;
    let (mut arg_min, mut arg_max) = (-c, -c);
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=steps {
        let xi = if k == steps { c } else { -c + k as f64 * h };
        let v = f(xi);
        if v < v_min {
            v_min = v;
            arg_min = xi;
        }
        if v > v_max {
            v_max = v;
            arg_max = xi;
        }
    }
    let refined_min = golden_min(f, (arg_min - h).max(-c), (arg_min + h).min(c));
    let refined_max = -golden_min(&|x| -f(x), (arg_max - h).max(-c), (arg_max + h).min(c));
    (v_min.min(refined_min), v_max.max(refined_max))
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(a)).min(f(b))
}
