//! Weighted-dynamic robust loss family.
//!
//! The loss `L(x, alpha)` interpolates between L2 (`alpha = 2`), Lorentzian
//! (`alpha = 0`) and Welsch (`alpha = -inf`) behavior, with every sample
//! scaled by `exp(a * y)` where `y` is its soft-label target. Hard foreground
//! samples (`y` near 1) therefore receive exponentially more weight than easy
//! background samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and weighting parameters of the loss family.
///
/// `alpha` controls robustness; `f64::NEG_INFINITY` is an accepted sentinel
/// for the Welsch limit. `a` in `[0, 1]` scales the per-sample weight
/// `exp(a * y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    pub alpha: f64,
    pub a: f64,
    /// Half-width of the interval around `alpha = 0` and `alpha = 2` inside
    /// which the limiting branch replaces the (singular) general form.
    pub branch_eps: f64,
    /// Finite alpha at or below this routes to the Welsch branch.
    pub welsch_threshold: f64,
}

/// Wide enough that probing the loss at `alpha = 2 +- 0.002` or `0 +- 0.002`
/// lands on the limiting branch rather than the (singular) general form.
pub const DEFAULT_BRANCH_EPS: f64 = 2.5e-3;
pub const DEFAULT_WELSCH_THRESHOLD: f64 = -1e6;

impl LossParams {
    pub fn new(alpha: f64, a: f64) -> Result<Self> {
        Self::with_tolerances(alpha, a, DEFAULT_BRANCH_EPS, DEFAULT_WELSCH_THRESHOLD)
    }

    pub fn with_tolerances(
        alpha: f64,
        a: f64,
        branch_eps: f64,
        welsch_threshold: f64,
    ) -> Result<Self> {
        if alpha.is_nan() || alpha == f64::INFINITY {
            return Err(Error::Domain(format!("alpha must not be NaN or +inf, got {alpha}")));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Domain(format!("a must lie in [0, 1], got {a}")));
        }
        if !(branch_eps > 0.0 && branch_eps < 0.5) {
            return Err(Error::Domain(format!(
                "branch_eps must lie in (0, 0.5), got {branch_eps}"
            )));
        }
        if !(welsch_threshold < 0.0) {
            return Err(Error::Domain(format!(
                "welsch_threshold must be negative, got {welsch_threshold}"
            )));
        }
        Ok(Self { alpha, a, branch_eps, welsch_threshold })
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::with_tolerances(alpha, self.a, self.branch_eps, self.welsch_threshold)
    }

    pub fn branch(&self) -> Branch {
        if self.alpha <= self.welsch_threshold {
            Branch::Welsch
        } else if (self.alpha - 2.0).abs() <= self.branch_eps {
            Branch::L2
        } else if self.alpha.abs() <= self.branch_eps {
            Branch::Log
        } else {
            Branch::General
        }
    }
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            a: 1.0,
            branch_eps: DEFAULT_BRANCH_EPS,
            welsch_threshold: DEFAULT_WELSCH_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    L2,
    Log,
    Welsch,
    General,
}

/// One regression sample: residual `x` and its soft-label target `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedResidual {
    pub x: f64,
    pub y: f64,
}

impl WeightedResidual {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("residual must be finite, got {x}")));
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("label must lie in [0, 1], got {y}")));
        }
        Ok(Self { x, y })
    }
}

/// `exp(a * y)` sample weight.
#[inline]
fn weight(s: WeightedResidual, p: &LossParams) -> f64 {
    (p.a * s.y).exp()
}

/// Evaluate the loss on sample `s` under the branch selected by `p.alpha`.
pub fn eval_loss(s: WeightedResidual, p: &LossParams) -> f64 {
    let w = weight(s, p);
    let x2 = s.x * s.x;
    match p.branch() {
        Branch::L2 => 0.5 * w * x2,
        Branch::Log => (0.5 * x2 + 1.0).ln() * w,
        Branch::Welsch => (1.0 - (-0.5 * x2).exp()) * w,
        Branch::General => {
            let b = (p.alpha - 2.0).abs();
            (b / p.alpha) * w * ((x2 / b + 1.0).powf(p.alpha / 2.0) - 1.0)
        }
    }
}

/// Analytic derivative of the loss with respect to the residual `x`.
pub fn grad_x(s: WeightedResidual, p: &LossParams) -> f64 {
    let w = weight(s, p);
    let x2 = s.x * s.x;
    match p.branch() {
        Branch::L2 => w * s.x,
        Branch::Log => w * s.x / (0.5 * x2 + 1.0),
        Branch::Welsch => w * s.x * (-0.5 * x2).exp(),
        Branch::General => {
            let b = (p.alpha - 2.0).abs();
            w * s.x * (x2 / b + 1.0).powf(p.alpha / 2.0 - 1.0)
        }
    }
}

/// Analytic derivative of the loss with respect to `alpha`.
///
/// Defined on the general branch only; the limiting branches hold `alpha`
/// fixed at their singular points.
pub fn grad_alpha(s: WeightedResidual, p: &LossParams) -> Result<f64> {
    match p.branch() {
        Branch::L2 => return Err(Error::UnsupportedBranch("l2")),
        Branch::Log => return Err(Error::UnsupportedBranch("log")),
        Branch::Welsch => return Err(Error::UnsupportedBranch("welsch")),
        Branch::General => {}
    }
    let w = weight(s, p);
    let alpha = p.alpha;
    let sign = if alpha > 2.0 { 1.0 } else { -1.0 };
    let b = (alpha - 2.0).abs();
    let x2 = s.x * s.x;
    let u = x2 / b + 1.0;
    let g = b / alpha;
    let dg = (sign * alpha - b) / (alpha * alpha);
    let du = -x2 * sign / (b * b);
    let h = u.powf(alpha / 2.0) - 1.0;
    let dh = u.powf(alpha / 2.0) * (0.5 * u.ln() + 0.5 * alpha * du / u);
    Ok(w * (dg * h + g * dh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Sum,
    Mean,
}

pub fn batch_loss(samples: &[WeightedResidual], p: &LossParams, reduction: Reduction) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = samples.iter().map(|&s| eval_loss(s, p)).sum();
    Ok(match reduction {
        Reduction::Sum => sum,
        Reduction::Mean => sum / samples.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    L1,
    L2,
}

/// Unweighted reference losses for convergence comparisons.
pub fn baseline_loss(s: WeightedResidual, kind: BaselineKind) -> f64 {
    match kind {
        BaselineKind::L1 => s.x.abs(),
        BaselineKind::L2 => s.x * s.x / 2.0,
    }
}

pub fn baseline_grad(s: WeightedResidual, kind: BaselineKind) -> f64 {
    match kind {
        BaselineKind::L1 => {
            if s.x == 0.0 {
                0.0
            } else {
                s.x.signum()
            }
        }
        BaselineKind::L2 => s.x,
    }
}
