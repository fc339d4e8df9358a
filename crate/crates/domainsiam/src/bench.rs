//! Convergence-speed benchmark on an imbalanced regression batch.
//!
//! One hard foreground sample (label near 1, large residual) against seven
//! easy background samples; every loss kind optimizes the same batch with
//! identically-configured momentum gradient descent, and we record how many
//! iterations each needs to reach 5% of its own initial loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{
    baseline_grad, baseline_loss, eval_loss, grad_x, BaselineKind, LossParams, WeightedResidual,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossBenchConfig {
    pub max_iters: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Convergence threshold as a fraction of the initial loss.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for LossBenchConfig {
    fn default() -> Self {
        Self { max_iters: 2000, lr: 0.05, momentum: 0.9, threshold: 0.05, seed: 0 }
    }
}

impl LossBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("bad loss-bench optimizer config".into()));
        }
        if !(0.0 < self.threshold && self.threshold < 1.0) {
            return Err(Error::InvalidConfig("threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// A loss under benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchLoss {
    Proposed(LossParams),
    Baseline(BaselineKind),
}

impl BenchLoss {
    pub fn label(&self) -> String {
        match self {
            BenchLoss::Proposed(p) => format!("proposed_a{}_w{}", p.alpha, p.a),
            BenchLoss::Baseline(BaselineKind::L1) => "l1".into(),
            BenchLoss::Baseline(BaselineKind::L2) => "l2".into(),
        }
    }

    fn eval(&self, s: WeightedResidual) -> f64 {
        match self {
            BenchLoss::Proposed(p) => eval_loss(s, p),
            BenchLoss::Baseline(k) => baseline_loss(s, *k),
        }
    }

    fn grad(&self, s: WeightedResidual) -> f64 {
        match self {
            BenchLoss::Proposed(p) => grad_x(s, p),
            BenchLoss::Baseline(k) => baseline_grad(s, *k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCurve {
    pub kind: String,
    pub losses: Vec<f64>,
    /// First iteration at which the loss reached `threshold` of its initial
    /// value; `None` if it never did within `max_iters`.
    pub iters_to_threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub curves: Vec<BenchCurve>,
}

/// The standard imbalanced batch: 7 easy samples with small residuals and
/// labels near 0, 1 hard sample with a large residual and label near 1.
/// Returned as (initial residual, label) pairs.
pub fn imbalanced_batch(seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut batch: Vec<(f64, f64)> = (0..7)
        .map(|_| {
            let x = rng.gen_range(0.15..0.3) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let y = rng.gen_range(0.0..0.1);
            (x, y)
        })
        .collect();
    batch.push((rng.gen_range(1.8..2.2), rng.gen_range(0.9..1.0)));
    batch
}

/// Run momentum gradient descent on the batch residuals under each loss.
/// Each sample's prediction is a free scalar, so the batch-mean loss is
/// driven to zero and kinds differ only in their gradient fields.
pub fn loss_bench(
    batch: &[(f64, f64)],
    kinds: &[BenchLoss],
    cfg: &LossBenchConfig,
) -> Result<BenchResult> {
    cfg.validate()?;
    if kinds.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 loss kinds".into()));
    }
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let inv_n = 1.0 / batch.len() as f64;
    let mut curves = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut residuals: Vec<f64> = batch.iter().map(|&(x, _)| x).collect();
        let mut velocity = vec![0.0; residuals.len()];
        let mean_loss = |res: &[f64]| -> f64 {
            res.iter()
                .zip(batch)
                .map(|(&x, &(_, y))| kind.eval(WeightedResidual { x, y }))
                .sum::<f64>()
                * inv_n
        };
        let initial = mean_loss(&residuals);
        let mut losses = vec![initial];
        let mut reached = if initial == 0.0 { Some(0) } else { None };
        for iter in 1..=cfg.max_iters {
            if reached.is_some() {
                break;
            }
            for i in 0..residuals.len() {
                let g = kind.grad(WeightedResidual { x: residuals[i], y: batch[i].1 }) * inv_n;
                velocity[i] = cfg.momentum * velocity[i] - cfg.lr * g;
                residuals[i] += velocity[i];
            }
            let loss = mean_loss(&residuals);
            if !loss.is_finite() {
                return Err(Error::Divergence { iteration: iter, loss });
            }
            losses.push(loss);
            if loss <= cfg.threshold * initial {
                reached = Some(iter);
            }
        }
        curves.push(BenchCurve { kind: kind.label(), losses, iters_to_threshold: reached });
    }
    Ok(BenchResult { curves })
}

pub fn default_kinds() -> Vec<BenchLoss> {
    vec![
        BenchLoss::Proposed(LossParams::default()),
        BenchLoss::Baseline(BaselineKind::L2),
        BenchLoss::Baseline(BaselineKind::L1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_init_reaches_threshold_immediately() {
        let batch = vec![(0.0, 0.1), (0.0, 0.9)];
        let res = loss_bench(&batch, &default_kinds(), &LossBenchConfig::default()).unwrap();
        for curve in &res.curves {
            assert_eq!(curve.iters_to_threshold, Some(0));
        }
    }

    #[test]
    fn identical_seeds_identical_results() {
        let cfg = LossBenchConfig::default();
        let batch = imbalanced_batch(3);
        let a = loss_bench(&batch, &default_kinds(), &cfg).unwrap();
        let b = loss_bench(&imbalanced_batch(3), &default_kinds(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn proposed_beats_l2_on_imbalanced_batch() {
        let cfg = LossBenchConfig::default();
        let kinds = [
            BenchLoss::Proposed(LossParams::default()),
            BenchLoss::Baseline(BaselineKind::L2),
        ];
        let mut wins = 0;
        for seed in 0..10 {
            let res = loss_bench(&imbalanced_batch(seed), &kinds, &cfg).unwrap();
            let proposed = res.curves[0].iters_to_threshold.unwrap();
            let l2 = res.curves[1].iters_to_threshold.unwrap();
            if proposed < l2 {
                wins += 1;
            }
        }
        assert!(wins >= 9, "proposed won only {wins}/10 seeds");
    }

    #[test]
    fn requires_two_kinds() {
        let batch = imbalanced_batch(0);
        let one = [BenchLoss::Baseline(BaselineKind::L2)];
        assert!(loss_bench(&batch, &one, &LossBenchConfig::default()).is_err());
    }
}
