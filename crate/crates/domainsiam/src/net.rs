//! Two-layer convolutional ridge regression network.
//!
//! The net regresses a feature map to a Gaussian soft-label grid under the
//! weighted-dynamic loss, and exposes the input-gradient channel scores used
//! for Domain-Aware channel selection.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::loss::{eval_loss, grad_x, LossParams, WeightedResidual};

/// One same-padded cross-correlation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernel: usize,
    pub c_in: usize,
    pub c_out: usize,
    /// `((o * c_in + i) * kernel + fr) * kernel + fc`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub use_bias: bool,
    pub trainable: bool,
}

impl ConvLayer {
    pub fn zeros(kernel: usize, c_in: usize, c_out: usize) -> Self {
        Self {
            kernel,
            c_in,
            c_out,
            weights: vec![0.0; c_out * c_in * kernel * kernel],
            bias: vec![0.0; c_out],
            use_bias: true,
            trainable: true,
        }
    }

    fn seeded(kernel: usize, c_in: usize, c_out: usize, rng: &mut ChaCha20Rng) -> Self {
        let fan_in = (c_in * kernel * kernel) as f64;
        let s = 1.0 / fan_in.sqrt();
        let mut layer = Self::zeros(kernel, c_in, c_out);
        for w in &mut layer.weights {
            *w = rng.gen_range(-s..s);
        }
        layer
    }

    #[inline]
    fn w(&self, o: usize, i: usize, fr: usize, fc: usize) -> f64 {
        self.weights[((o * self.c_in + i) * self.kernel + fr) * self.kernel + fc]
    }

    fn forward(&self, input: &FeatureMap) -> FeatureMap {
        let (h, w) = (input.height, input.width);
        let pad = (self.kernel / 2) as i64;
        let mut out = FeatureMap::zeros(h, w, self.c_out, input.stride);
        for o in 0..self.c_out {
            for r in 0..h {
                for c in 0..w {
                    let mut acc = if self.use_bias { self.bias[o] } else { 0.0 };
                    for i in 0..self.c_in {
                        for fr in 0..self.kernel {
                            let rr = r as i64 + fr as i64 - pad;
                            if rr < 0 || rr >= h as i64 {
                                continue;
                            }
                            for fc in 0..self.kernel {
                                let cc = c as i64 + fc as i64 - pad;
                                if cc < 0 || cc >= w as i64 {
                                    continue;
                                }
                                acc += self.w(o, i, fr, fc)
                                    * input.get(rr as usize, cc as usize, i);
                            }
                        }
                    }
                    out.set(r, c, o, acc);
                }
            }
        }
        out
    }

    /// Weight, bias and input gradients for upstream gradient `dout`.
    fn backward(&self, input: &FeatureMap, dout: &FeatureMap) -> (Vec<f64>, Vec<f64>, FeatureMap) {
        let (h, w) = (input.height, input.width);
        let pad = (self.kernel / 2) as i64;
        let mut dweights = vec![0.0; self.weights.len()];
        let mut dbias = vec![0.0; self.c_out];
        let mut dinput = FeatureMap::zeros(h, w, self.c_in, input.stride);
        for o in 0..self.c_out {
            for r in 0..h {
                for c in 0..w {
                    let g = dout.get(r, c, o);
                    if g == 0.0 {
                        continue;
                    }
                    dbias[o] += g;
                    for i in 0..self.c_in {
                        for fr in 0..self.kernel {
                            let rr = r as i64 + fr as i64 - pad;
                            if rr < 0 || rr >= h as i64 {
                                continue;
                            }
                            for fc in 0..self.kernel {
                                let cc = c as i64 + fc as i64 - pad;
                                if cc < 0 || cc >= w as i64 {
                                    continue;
                                }
                                let idx = ((o * self.c_in + i) * self.kernel + fr)
                                    * self.kernel
                                    + fc;
                                dweights[idx] += g * input.get(rr as usize, cc as usize, i);
                                let prev = dinput.get(rr as usize, cc as usize, i);
                                dinput.set(
                                    rr as usize,
                                    cc as usize,
                                    i,
                                    prev + g * self.w(o, i, fr, fc),
                                );
                            }
                        }
                    }
                }
            }
        }
        (dweights, dbias, dinput)
    }
}

/// Two-layer regression net: same-padded convolutions, identity activations,
/// single-channel output.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeNet {
    pub layer1: ConvLayer,
    pub layer2: ConvLayer,
    pub lambda: f64,
}

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_LAMBDA: f64 = 1e-4;

impl RidgeNet {
    /// Standard shape: 3x3 to `DEFAULT_HIDDEN` channels, then 1x1 to one.
    pub fn new(c_in: usize, lambda: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self {
            layer1: ConvLayer::seeded(3, c_in, DEFAULT_HIDDEN, &mut rng),
            layer2: ConvLayer::seeded(1, DEFAULT_HIDDEN, 1, &mut rng),
            lambda,
        }
    }

    /// Degenerate 1x1 linear configuration: layer1 holds one weight per input
    /// channel (no bias), layer2 is a frozen identity. Used for equivalence
    /// checks against the closed-form solution.
    pub fn linear_1x1(c_in: usize, lambda: f64) -> Self {
        let mut layer1 = ConvLayer::zeros(1, c_in, 1);
        layer1.use_bias = false;
        let mut layer2 = ConvLayer::zeros(1, 1, 1);
        layer2.weights[0] = 1.0;
        layer2.use_bias = false;
        layer2.trainable = false;
        Self { layer1, layer2, lambda }
    }

    pub fn c_in(&self) -> usize {
        self.layer1.c_in
    }

    /// Sum of squared trainable weights (biases excluded).
    fn weight_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for layer in [&self.layer1, &self.layer2] {
            if layer.trainable {
                acc += layer.weights.iter().map(|w| w * w).sum::<f64>();
            }
        }
        acc
    }
}

/// Forward pass producing the single-channel H x W prediction grid.
pub fn net_forward(net: &RidgeNet, features: &FeatureMap) -> Result<Vec<f64>> {
    if features.channels != net.c_in() {
        return Err(Error::InvalidArgument(format!(
            "feature channels {} do not match net input channels {}",
            features.channels,
            net.c_in()
        )));
    }
    let hidden = net.layer1.forward(features);
    let out = net.layer2.forward(&hidden);
    Ok(out.data().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    Fixed { alpha: f64 },
    Linear { start: f64, end: f64 },
}

impl AlphaSchedule {
    fn at(&self, epoch: usize, epochs: usize) -> f64 {
        match *self {
            AlphaSchedule::Fixed { alpha } => alpha,
            AlphaSchedule::Linear { start, end } => {
                if epochs <= 1 {
                    start
                } else {
                    let t = epoch as f64 / (epochs - 1) as f64;
                    start + (end - start) * t
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub alpha_schedule: AlphaSchedule,
    pub a: f64,
    /// Maximum absolute cyclic shift (cells) for batch augmentation;
    /// 0 disables augmentation and trains full-batch on the given instance.
    pub shift_augment: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 70,
            batch_size: 8,
            momentum: 0.9,
            lr_start: 1e-3,
            lr_end: 1e-8,
            alpha_schedule: AlphaSchedule::Fixed { alpha: 1.0 },
            a: 1.0,
            shift_augment: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr_start >= self.lr_end && self.lr_end > 0.0) {
            return Err(Error::InvalidConfig("need lr_start >= lr_end > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Geometric annealing from `lr_start` to `lr_end`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 || self.lr_start == self.lr_end {
            return self.lr_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(t)
    }
}

/// Cyclic shift of a feature map by (dr, dc) cells.
fn shift_map(f: &FeatureMap, dr: i64, dc: i64) -> FeatureMap {
    let (h, w) = (f.height as i64, f.width as i64);
    let mut out = FeatureMap::zeros(f.height, f.width, f.channels, f.stride);
    for ch in 0..f.channels {
        for r in 0..f.height {
            for c in 0..f.width {
                let sr = (r as i64 - dr).rem_euclid(h) as usize;
                let sc = (c as i64 - dc).rem_euclid(w) as usize;
                out.set(r, c, ch, f.get(sr, sc, ch));
            }
        }
    }
    out
}

fn shift_labels(y: &[f64], h: usize, w: usize, dr: i64, dc: i64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    for r in 0..h {
        for c in 0..w {
            let sr = (r as i64 - dr).rem_euclid(h as i64) as usize;
            let sc = (c as i64 - dc).rem_euclid(w as i64) as usize;
            out[r * w + c] = y[sr * w + sc];
        }
    }
    out
}

/// Robust objective on one (features, labels) pair:
/// per-cell loss summed, plus `lambda/2 * ||W||^2`.
///
/// At `alpha = 2`, `a = 0` the stationary point coincides with the
/// closed-form ridge solution for `lambda`.
fn objective(net: &RidgeNet, pred: &[f64], labels: &[f64], p: &LossParams) -> f64 {
    let mut acc = 0.0;
    for (pv, yv) in pred.iter().zip(labels) {
        let s = WeightedResidual { x: pv - yv, y: *yv };
        acc += eval_loss(s, p);
    }
    acc + 0.5 * net.lambda * net.weight_norm_sq()
}

struct Gradients {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Forward + backward on one pair; returns (objective without penalty, grads,
/// input gradient).
fn backprop(
    net: &RidgeNet,
    features: &FeatureMap,
    labels: &[f64],
    p: &LossParams,
) -> (f64, Gradients, FeatureMap) {
    let hidden = net.layer1.forward(features);
    let out = net.layer2.forward(&hidden);
    let pred = out.data();
    let mut loss = 0.0;
    let mut dpred = FeatureMap::zeros(out.height, out.width, 1, out.stride);
    for r in 0..out.height {
        for c in 0..out.width {
            let yv = labels[r * out.width + c];
            let s = WeightedResidual { x: pred[r * out.width + c] - yv, y: yv };
            loss += eval_loss(s, p);
            dpred.set(r, c, 0, grad_x(s, p));
        }
    }
    let (w2, b2, dhidden) = net.layer2.backward(&hidden, &dpred);
    let (w1, b1, dinput) = net.layer1.backward(features, &dhidden);
    (loss, Gradients { w1, b1, w2, b2 }, dinput)
}

/// Train the net with momentum gradient descent and geometric learning-rate
/// annealing. Labels are the row-major soft-label grid matching the feature
/// map's spatial dims; each cell contributes a `WeightedResidual` with its
/// label value as the weight exponent. Returns the per-iteration objective.
pub fn train_net(
    net: &mut RidgeNet,
    features: &FeatureMap,
    labels: &[f64],
    base: &LossParams,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if features.channels != net.c_in() {
        return Err(Error::InvalidArgument(format!(
            "feature channels {} do not match net input channels {}",
            features.channels,
            net.c_in()
        )));
    }
    if labels.len() != features.height * features.width {
        return Err(Error::InvalidArgument("label grid does not match feature dims".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut v1 = vec![0.0; net.layer1.weights.len()];
    let mut vb1 = vec![0.0; net.layer1.bias.len()];
    let mut v2 = vec![0.0; net.layer2.weights.len()];
    let mut vb2 = vec![0.0; net.layer2.bias.len()];
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let alpha = cfg.alpha_schedule.at(epoch, cfg.epochs);
        let p = LossParams::with_tolerances(alpha, cfg.a, base.branch_eps, base.welsch_threshold)?;
        let lr = cfg.learning_rate(epoch);

        // assemble the batch: identity pair first, then seeded cyclic shifts
        let mut batch: Vec<(FeatureMap, Vec<f64>)> = Vec::new();
        batch.push((features.clone(), labels.to_vec()));
        if cfg.shift_augment > 0 {
            let m = cfg.shift_augment as i64;
            while batch.len() < cfg.batch_size {
                let dr = rng.gen_range(-m..=m);
                let dc = rng.gen_range(-m..=m);
                batch.push((
                    shift_map(features, dr, dc),
                    shift_labels(labels, features.height, features.width, dr, dc),
                ));
            }
        }

        let inv_b = 1.0 / batch.len() as f64;
        let mut g1 = vec![0.0; v1.len()];
        let mut gb1 = vec![0.0; vb1.len()];
        let mut g2 = vec![0.0; v2.len()];
        let mut gb2 = vec![0.0; vb2.len()];
        let mut batch_loss = 0.0;
        for (bf, by) in &batch {
            let (loss, grads, _) = backprop(net, bf, by, &p);
            batch_loss += loss * inv_b;
            for (g, d) in g1.iter_mut().zip(&grads.w1) {
                *g += d * inv_b;
            }
            for (g, d) in gb1.iter_mut().zip(&grads.b1) {
                *g += d * inv_b;
            }
            for (g, d) in g2.iter_mut().zip(&grads.w2) {
                *g += d * inv_b;
            }
            for (g, d) in gb2.iter_mut().zip(&grads.b2) {
                *g += d * inv_b;
            }
        }
        let obj = batch_loss + 0.5 * net.lambda * net.weight_norm_sq();
        if !obj.is_finite() {
            return Err(Error::Divergence { iteration: epoch, loss: obj });
        }
        history.push(obj);

        if net.layer1.trainable {
            for i in 0..net.layer1.weights.len() {
                let g = g1[i] + net.lambda * net.layer1.weights[i];
                v1[i] = cfg.momentum * v1[i] - lr * g;
                net.layer1.weights[i] += v1[i];
            }
            if net.layer1.use_bias {
                for i in 0..net.layer1.bias.len() {
                    vb1[i] = cfg.momentum * vb1[i] - lr * gb1[i];
                    net.layer1.bias[i] += vb1[i];
                }
            }
        }
        if net.layer2.trainable {
            for i in 0..net.layer2.weights.len() {
                let g = g2[i] + net.lambda * net.layer2.weights[i];
                v2[i] = cfg.momentum * v2[i] - lr * g;
                net.layer2.weights[i] += v2[i];
            }
            if net.layer2.use_bias {
                for i in 0..net.layer2.bias.len() {
                    vb2[i] = cfg.momentum * vb2[i] - lr * gb2[i];
                    net.layer2.bias[i] += vb2[i];
                }
            }
        }
    }
    Ok(history)
}

/// Per-channel importance scores: spatial mean of the objective's gradient
/// with respect to each input channel, ranked by magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScores {
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
}

pub fn channel_scores(
    net: &RidgeNet,
    features: &FeatureMap,
    labels: &[f64],
    p: &LossParams,
) -> Result<ChannelScores> {
    if features.channels != net.c_in() {
        return Err(Error::InvalidArgument(format!(
            "feature channels {} do not match net input channels {}",
            features.channels,
            net.c_in()
        )));
    }
    if labels.len() != features.height * features.width {
        return Err(Error::InvalidArgument("label grid does not match feature dims".into()));
    }
    let (_, _, dinput) = backprop(net, features, labels, p);
    let plane = (features.height * features.width) as f64;
    let scores: Vec<f64> = (0..features.channels)
        .map(|ch| dinput.channel(ch).iter().sum::<f64>() / plane)
        .collect();
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&i, &j| {
        scores[j]
            .abs()
            .partial_cmp(&scores[i].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    Ok(ChannelScores { scores, ranking })
}

/// First `k` entries of the ranking (descending score magnitude, ties broken
/// by lower channel index).
pub fn select_top_k(scores: &ChannelScores, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for {} channels",
            scores.scores.len()
        )));
    }
    Ok(scores.ranking[..k].to_vec())
}

/// Objective value for external callers (benchmarks, tests).
pub fn net_objective(
    net: &RidgeNet,
    features: &FeatureMap,
    labels: &[f64],
    p: &LossParams,
) -> Result<f64> {
    let pred = net_forward(net, features)?;
    Ok(objective(net, &pred, labels, p))
}

const MAGIC: &[u8; 4] = b"DSRN";
const FORMAT_VERSION: u32 = 1;

/// Serialize to the versioned binary container: magic "DSRN", u32 version,
/// shape header, little-endian f64 weights in layer order.
pub fn save_net(net: &RidgeNet, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for layer in [&net.layer1, &net.layer2] {
        out.extend_from_slice(&(layer.kernel as u32).to_le_bytes());
        out.extend_from_slice(&(layer.c_in as u32).to_le_bytes());
        out.extend_from_slice(&(layer.c_out as u32).to_le_bytes());
        out.push(layer.use_bias as u8);
        out.push(layer.trainable as u8);
    }
    out.extend_from_slice(&net.lambda.to_le_bytes());
    for layer in [&net.layer1, &net.layer2] {
        for w in layer.weights.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn load_net(path: &Path) -> Result<RidgeNet> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Format("truncated net container".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != MAGIC {
        return Err(Error::Format("bad magic, expected DSRN".into()));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let mut headers = Vec::new();
    for _ in 0..2 {
        let kernel = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let c_in = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let c_out = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let use_bias = take(&mut pos, 1)?[0] != 0;
        let trainable = take(&mut pos, 1)?[0] != 0;
        headers.push((kernel, c_in, c_out, use_bias, trainable));
    }
    let lambda = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let mut layers = Vec::new();
    for (kernel, c_in, c_out, use_bias, trainable) in headers {
        let mut layer = ConvLayer::zeros(kernel, c_in, c_out);
        layer.use_bias = use_bias;
        layer.trainable = trainable;
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        }
        layers.push(layer);
    }
    let layer2 = layers.pop().unwrap();
    let layer1 = layers.pop().unwrap();
    if layer1.c_out != layer2.c_in || layer2.c_out != 1 {
        return Err(Error::Format("inconsistent layer shapes".into()));
    }
    Ok(RidgeNet { layer1, layer2, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::{closed_form, DesignMatrix};

    fn random_features(h: usize, w: usize, c: usize, seed: u64) -> FeatureMap {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeatureMap::new(h, w, c, 1, data).unwrap()
    }

    fn labels_from(pred: &[f64]) -> Vec<f64> {
        pred.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }

    #[test]
    fn zero_net_gives_zero_map() {
        let net = RidgeNet {
            layer1: ConvLayer::zeros(3, 2, 4),
            layer2: ConvLayer::zeros(1, 4, 1),
            lambda: 0.0,
        };
        let f = random_features(6, 6, 2, 1);
        let out = net_forward(&net, &f).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_1x1_passes_channel_through() {
        let mut net = RidgeNet::linear_1x1(1, 0.0);
        net.layer1.weights[0] = 1.0;
        let f = random_features(5, 5, 1, 2);
        let out = net_forward(&net, &f).unwrap();
        assert_eq!(out, f.data().to_vec());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let net = RidgeNet::new(4, 0.0, 0);
        let f = random_features(5, 5, 2, 3);
        assert!(net_forward(&net, &f).is_err());
    }

    #[test]
    fn forward_matches_naive_correlation() {
        // single 3x3 layer vs a direct quadruple loop
        let mut net = RidgeNet::new(2, 0.0, 9);
        net.layer2 = ConvLayer::zeros(1, DEFAULT_HIDDEN, 1);
        net.layer2.weights[0] = 1.0; // read hidden channel 0 only
        net.layer2.use_bias = false;
        let f = random_features(7, 7, 2, 4);
        let out = net_forward(&net, &f).unwrap();
        for r in 0..7i64 {
            for c in 0..7i64 {
                let mut acc = net.layer1.bias[0];
                for i in 0..2 {
                    for fr in 0..3i64 {
                        for fc in 0..3i64 {
                            let (rr, cc) = (r + fr - 1, c + fc - 1);
                            if rr < 0 || rr >= 7 || cc < 0 || cc >= 7 {
                                continue;
                            }
                            acc += net.layer1.w(0, i, fr as usize, fc as usize)
                                * f.get(rr as usize, cc as usize, i);
                        }
                    }
                }
                assert!((out[(r * 7 + c) as usize] - acc).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn geometric_schedule_constant_ratio() {
        let cfg = TrainConfig { epochs: 10, ..Default::default() };
        let ratios: Vec<f64> = (0..9)
            .map(|e| cfg.learning_rate(e + 1) / cfg.learning_rate(e))
            .collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() <= 1e-12 * ratios[0].abs());
        }
        let flat = TrainConfig { epochs: 1, lr_start: 1e-3, lr_end: 1e-3, ..Default::default() };
        assert_eq!(flat.learning_rate(0), 1e-3);
    }

    #[test]
    fn planted_model_recovery() {
        // labels generated by a known planted 1x1 net; alpha = 2, a = 0.
        // positive features and weights keep the planted output inside [0, 1]
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let data: Vec<f64> = (0..8 * 8 * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = FeatureMap::new(8, 8, 3, 1, data).unwrap();
        let mut planted = RidgeNet::linear_1x1(3, 0.0);
        planted.layer1.weights.copy_from_slice(&[0.2, 0.3, 0.1]);
        let labels = labels_from(&net_forward(&planted, &f).unwrap());
        let mut net = RidgeNet::linear_1x1(3, 0.0);
        let cfg = TrainConfig {
            epochs: 400,
            lr_start: 5e-3,
            lr_end: 5e-3,
            alpha_schedule: AlphaSchedule::Fixed { alpha: 2.0 },
            a: 0.0,
            shift_augment: 0,
            ..Default::default()
        };
        let base = LossParams::new(2.0, 0.0).unwrap();
        let history = train_net(&mut net, &f, &labels, &base, &cfg).unwrap();
        assert!(history.last().unwrap() <= &(1e-4 * history[0]));
    }

    #[test]
    fn linear_net_matches_closed_form() {
        let f = random_features(6, 6, 4, 13);
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let labels: Vec<f64> = (0..36).map(|_| rng.gen_range(0.01..1.0)).collect();
        let lambda = 0.05;
        let mut net = RidgeNet::linear_1x1(4, lambda);
        let cfg = TrainConfig {
            epochs: 4000,
            lr_start: 2e-3,
            lr_end: 2e-3,
            alpha_schedule: AlphaSchedule::Fixed { alpha: 2.0 },
            a: 0.0,
            shift_augment: 0,
            ..Default::default()
        };
        let base = LossParams::new(2.0, 0.0).unwrap();
        train_net(&mut net, &f, &labels, &base, &cfg).unwrap();

        // flattened instance: rows are cells, columns are channels
        let mut data = Vec::with_capacity(36 * 4);
        for r in 0..6 {
            for c in 0..6 {
                for ch in 0..4 {
                    data.push(f.get(r, c, ch));
                }
            }
        }
        let x = DesignMatrix::new(36, 4, data).unwrap();
        let oracle = closed_form(&x, &labels, lambda).unwrap();
        for (w, o) in net.layer1.weights.iter().zip(&oracle.weights) {
            assert!((w - o).abs() <= 1e-3, "trained {w} vs closed form {o}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let f = random_features(6, 6, 2, 21);
        let labels: Vec<f64> = f.channel(0).iter().map(|v| v.abs().clamp(0.0, 1.0)).collect();
        let base = LossParams::default();
        let cfg = TrainConfig { epochs: 5, ..Default::default() };
        let mut n1 = RidgeNet::new(2, DEFAULT_LAMBDA, 3);
        let mut n2 = RidgeNet::new(2, DEFAULT_LAMBDA, 3);
        let h1 = train_net(&mut n1, &f, &labels, &base, &cfg).unwrap();
        let h2 = train_net(&mut n2, &f, &labels, &base, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(n1, n2);
    }

    #[test]
    fn disconnected_channel_scores_zero() {
        let mut net = RidgeNet::new(3, 0.0, 5);
        // zero out channel 1's kernels in layer 1
        for o in 0..net.layer1.c_out {
            for fr in 0..3 {
                for fc in 0..3 {
                    let idx = ((o * 3 + 1) * 3 + fr) * 3 + fc;
                    net.layer1.weights[idx] = 0.0;
                }
            }
        }
        let mut f = random_features(6, 6, 3, 6);
        let plane = 36;
        for v in &mut f.data_mut()[plane..2 * plane] {
            *v = 0.0;
        }
        let labels = vec![0.5; plane];
        let scores = channel_scores(&net, &f, &labels, &LossParams::default()).unwrap();
        assert_eq!(scores.scores[1], 0.0);
    }

    #[test]
    fn channel_scores_match_finite_differences() {
        let net = RidgeNet::new(3, DEFAULT_LAMBDA, 8);
        let f = random_features(6, 6, 3, 9);
        let labels: Vec<f64> = (0..36).map(|i| ((i * 31) % 97) as f64 / 96.0).collect();
        let p = LossParams::default();
        let scores = channel_scores(&net, &f, &labels, &p).unwrap();
        let plane = 36usize;
        let h = 1e-6;
        for ch in 0..3 {
            let perturb = |delta: f64| {
                let mut g = f.clone();
                for v in &mut g.data_mut()[ch * plane..(ch + 1) * plane] {
                    *v += delta;
                }
                net_objective(&net, &g, &labels, &p).unwrap()
            };
            let fd = (perturb(h) - perturb(-h)) / (2.0 * h) / plane as f64;
            let err = (scores.scores[ch] - fd).abs();
            assert!(err <= 1e-4 * fd.abs().max(1e-8), "ch {ch}: {} vs {fd}", scores.scores[ch]);
        }
    }

    #[test]
    fn top_k_selection_rules() {
        let s = ChannelScores { scores: vec![0.1, -0.9, 0.5], ranking: vec![1, 2, 0] };
        assert_eq!(select_top_k(&s, 2).unwrap(), vec![1, 2]);
        assert_eq!(select_top_k(&s, 3).unwrap(), vec![1, 2, 0]);
        assert!(select_top_k(&s, 0).is_err());
        assert!(select_top_k(&s, 4).is_err());
        // ties break toward lower channel index
        let f = random_features(4, 4, 3, 10);
        let labels = vec![0.5; 16];
        let mut net = RidgeNet::linear_1x1(3, 0.0);
        net.layer1.weights.copy_from_slice(&[1.0, 1.0, 1.0]);
        // make all channels identical so scores tie exactly
        let plane = 16;
        let first: Vec<f64> = f.channel(0).to_vec();
        let mut g = f.clone();
        for ch in 1..3 {
            g.data_mut()[ch * plane..(ch + 1) * plane].copy_from_slice(&first);
        }
        let scores = channel_scores(&net, &g, &labels, &LossParams::default()).unwrap();
        assert_eq!(scores.ranking, vec![0, 1, 2]);
    }

    #[test]
    fn ranking_invariant_under_uniform_scaling() {
        let net = RidgeNet::new(4, 0.0, 15);
        let f = random_features(5, 5, 4, 16);
        let labels: Vec<f64> = (0..25).map(|i| (i as f64 / 24.0).clamp(0.0, 1.0)).collect();
        let scores = channel_scores(&net, &f, &labels, &LossParams::default()).unwrap();
        let scaled = ChannelScores {
            scores: scores.scores.iter().map(|s| s * 3.7).collect(),
            ranking: {
                let sc: Vec<f64> = scores.scores.iter().map(|s| s * 3.7).collect();
                let mut r: Vec<usize> = (0..sc.len()).collect();
                r.sort_by(|&i, &j| sc[j].abs().partial_cmp(&sc[i].abs()).unwrap().then(i.cmp(&j)));
                r
            },
        };
        assert_eq!(scores.ranking, scaled.ranking);
    }

    #[test]
    fn net_round_trips_through_container() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.dsrn");
        let net = RidgeNet::new(3, DEFAULT_LAMBDA, 42);
        save_net(&net, &path).unwrap();
        let back = load_net(&path).unwrap();
        assert_eq!(net, back);
        // corrupt magic
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_net(&path).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let f = random_features(4, 4, 1, 30);
        let labels = vec![0.5; 16];
        let mut net = RidgeNet::linear_1x1(1, 0.0);
        let cfg = TrainConfig {
            epochs: 200,
            lr_start: 10.0,
            lr_end: 10.0,
            alpha_schedule: AlphaSchedule::Fixed { alpha: 2.0 },
            a: 0.0,
            shift_augment: 0,
            ..Default::default()
        };
        let base = LossParams::new(2.0, 0.0).unwrap();
        let res = train_net(&mut net, &f, &labels, &base, &cfg);
        assert!(matches!(res, Err(Error::Divergence { .. })));
    }
}
