//! Synthetic tracking sequences and run metrics.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Frame;
use crate::tracker::{init, step, BBox, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Static,
    Linear { vx: f64, vy: f64 },
    /// Horizontal oscillation of the given amplitude and period (frames).
    Sinusoidal { amp: f64, period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub start: usize,
    pub length: usize,
    /// Fraction of the target height covered from the top.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub frames: usize,
    pub frame_size: (usize, usize),
    /// (w, h) pixels.
    pub target_size: (f64, f64),
    pub motion: Motion,
    /// Multiplicative size change per frame.
    pub scale_drift: f64,
    pub noise_std: f64,
    pub occlusion: Option<Occlusion>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            frames: 64,
            frame_size: (128, 128),
            target_size: (24.0, 24.0),
            motion: Motion::Static,
            scale_drift: 0.0,
            noise_std: 0.02,
            occlusion: None,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidConfig("frames must be >= 1".into()));
        }
        if self.noise_std < 0.0 {
            return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
        }
        if self.target_size.0 < 2.0 || self.target_size.1 < 2.0 {
            return Err(Error::InvalidConfig("target must be at least 2x2 px".into()));
        }
        Ok(())
    }

    fn center_at(&self, t: usize) -> (f64, f64) {
        let (h, w) = self.frame_size;
        let (cx0, cy0) = (w as f64 / 2.0, h as f64 / 2.0);
        match self.motion {
            Motion::Static => (cx0, cy0),
            Motion::Linear { vx, vy } => (cx0 + vx * t as f64, cy0 + vy * t as f64),
            Motion::Sinusoidal { amp, period } => {
                let phase = 2.0 * std::f64::consts::PI * t as f64 / period;
                (cx0 + amp * phase.sin(), cy0)
            }
        }
    }

    fn size_at(&self, t: usize) -> (f64, f64) {
        let s = (1.0 + self.scale_drift).powi(t as i32);
        (self.target_size.0 * s, self.target_size.1 * s)
    }
}

/// High-contrast seeded texture sampled bilinearly over the target box.
struct Texture {
    side: usize,
    values: Vec<f64>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let side = 16usize;
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b9).wrapping_add(1));
        let values = (0..side * side)
            .map(|i| {
                let base: f64 = if (i / side + i % side) % 2 == 0 { 0.85 } else { 0.55 };
                (base + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0)
            })
            .collect();
        Self { side, values }
    }

    fn sample(&self, u: f64, v: f64) -> f64 {
        let x = (u * (self.side - 1) as f64).clamp(0.0, (self.side - 1) as f64);
        let y = (v * (self.side - 1) as f64).clamp(0.0, (self.side - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.side - 1), (y0 + 1).min(self.side - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |r: usize, c: usize| self.values[r * self.side + c];
        at(y0, x0) * (1.0 - fx) * (1.0 - fy)
            + at(y0, x1) * fx * (1.0 - fy)
            + at(y1, x0) * (1.0 - fx) * fy
            + at(y1, x1) * fx * fy
    }
}

/// Deterministic textured-square target over a noise background; ground
/// truth is exact. Errors if the motion model drives the target out of frame.
pub fn synth_sequence(spec: &SyntheticSpec) -> Result<(Vec<Frame>, Vec<BBox>)> {
    spec.validate()?;
    let (fh, fw) = spec.frame_size;
    let texture = Texture::new(spec.seed);
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut boxes = Vec::with_capacity(spec.frames);

    for t in 0..spec.frames {
        let (cx, cy) = spec.center_at(t);
        let (tw, th) = spec.size_at(t);
        let (x0, y0) = (cx - tw / 2.0, cy - th / 2.0);
        let (x1, y1) = (cx + tw / 2.0, cy + th / 2.0);
        if x0 < 0.0 || y0 < 0.0 || x1 > fw as f64 || y1 > fh as f64 {
            return Err(Error::InvalidConfig(format!(
                "target leaves the frame at t = {t}"
            )));
        }
        let occluded_below = match spec.occlusion {
            Some(o) if t >= o.start && t < o.start + o.length => y0 + o.fraction * th,
            _ => y0,
        };
        let mut pixels = Vec::with_capacity(fh * fw);
        for r in 0..fh {
            for c in 0..fw {
                let noise = 0.3 + spec.noise_std * rng.gen_range(-1.0..1.0);
                let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
                let inside =
                    px >= x0 && px < x1 && py >= occluded_below.max(y0) && py < y1;
                let v = if inside {
                    texture.sample((px - x0) / tw, (py - y0) / th)
                } else {
                    noise
                };
                pixels.push(v.clamp(0.0, 1.0));
            }
        }
        frames.push(Frame::new(fh, fw, pixels)?);
        boxes.push(BBox::new(cx, cy, tw, th));
    }
    Ok((frames, boxes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackMetrics {
    pub center_errors: Vec<f64>,
    pub ious: Vec<f64>,
    pub mean_iou: f64,
    pub success_at_half: f64,
    pub fps: f64,
}

/// Initialize on the first frame with its ground-truth box, step through the
/// rest, and score against ground truth. A lost target freezes the last box
/// and scores IoU 0 from then on.
pub fn run_tracking(frames: &[Frame], gt: &[BBox], cfg: &TrackerConfig) -> Result<TrackMetrics> {
    if frames.len() < 2 || frames.len() != gt.len() {
        return Err(Error::InvalidArgument(
            "need >= 2 frames with one ground-truth box each".into(),
        ));
    }
    let start = Instant::now();
    let mut state = init(&frames[0], gt[0], cfg)?;
    let mut center_errors = Vec::with_capacity(frames.len() - 1);
    let mut ious = Vec::with_capacity(frames.len() - 1);
    let mut lost = false;
    let mut last_box = gt[0];
    for (frame, truth) in frames[1..].iter().zip(&gt[1..]) {
        if !lost {
            match step(&state, frame) {
                Ok((next, bbox)) => {
                    state = next;
                    last_box = bbox;
                }
                Err(Error::LostTarget) => lost = true,
                Err(e) => return Err(e),
            }
        }
        let err = ((last_box.cx - truth.cx).powi(2) + (last_box.cy - truth.cy).powi(2)).sqrt();
        center_errors.push(err);
        ious.push(if lost { 0.0 } else { last_box.iou(truth) });
    }
    let elapsed = start.elapsed().as_secs_f64();
    let n = ious.len() as f64;
    let mean_iou = ious.iter().sum::<f64>() / n;
    let success_at_half = ious.iter().filter(|&&v| v >= 0.5).count() as f64 / n;
    let fps = if elapsed > 0.0 { frames.len() as f64 / elapsed } else { f64::INFINITY };
    Ok(TrackMetrics { center_errors, ious, mean_iou, success_at_half, fps })
}
