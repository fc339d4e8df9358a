//! Template tracker: train the regression net on the first frame, select the
//! highest-scoring channels, then localize per frame by cross-correlating
//! template and search features over a scale pyramid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, extract_patch, ExtractorSpec, FeatureMap, Frame};
use crate::labels::gaussian_label;
use crate::loss::LossParams;
use crate::net::{
    channel_scores, select_top_k, train_net, ChannelScores, RidgeNet, TrainConfig, DEFAULT_LAMBDA,
};

/// Axis-aligned box: center (x, y) in image coordinates plus width/height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// Intersection over union of two boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let half = |b: &BBox| (b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0);
        let (ax0, ay0, ax1, ay1) = half(self);
        let (bx0, by0, bx1, by1) = half(other);
        let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        let inter = iw * ih;
        let union = self.w * self.h + other.w * other.h - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Scale pyramid base O; candidate scales are O^s for each exponent.
    pub scale_base: f64,
    pub scale_exponents: Vec<i32>,
    /// Linear interpolation factor toward the chosen pyramid scale.
    pub scale_lerp: f64,
    /// Channels to keep; clamped to the extractor's channel count.
    pub top_k: usize,
    /// Label kernel width as a fraction of the target extent in cells.
    pub sigma_factor: f64,
    pub template_size: usize,
    pub search_size: usize,
    /// Search crop side as a multiple of the (scaled) target extent.
    pub search_context: f64,
    /// 3x3 quadratic sub-cell peak refinement.
    pub subcell_refine: bool,
    /// Cosine window on the response before peak picking.
    pub cosine_window: bool,
    pub lambda: f64,
    pub extractor: ExtractorSpec,
    pub loss: LossParams,
    pub train: TrainConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            scale_base: 1.0375,
            scale_exponents: vec![-2, 0, 2],
            scale_lerp: 0.435,
            top_k: 100,
            sigma_factor: 0.1,
            template_size: 127,
            search_size: 255,
            search_context: 2.0,
            subcell_refine: true,
            cosine_window: false,
            lambda: DEFAULT_LAMBDA,
            extractor: ExtractorSpec::default(),
            loss: LossParams::default(),
            train: TrainConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_base > 1.0) {
            return Err(Error::InvalidConfig("scale_base must be > 1".into()));
        }
        if self.scale_exponents.is_empty() {
            return Err(Error::InvalidConfig("scale_exponents must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.scale_lerp) {
            return Err(Error::InvalidConfig("scale_lerp must lie in [0, 1]".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if !(self.sigma_factor > 0.0) || !(self.search_context > 0.0) {
            return Err(Error::InvalidConfig("sigma_factor and search_context must be positive".into()));
        }
        if self.template_size < 3 || self.search_size <= self.template_size {
            return Err(Error::InvalidConfig("need search_size > template_size >= 3".into()));
        }
        self.extractor.validate()?;
        self.train.validate()
    }

    /// Pyramid scale factors O^s in exponent order.
    pub fn pyramid(&self) -> Vec<f64> {
        self.scale_exponents
            .iter()
            .map(|&s| self.scale_base.powi(s))
            .collect()
    }
}

/// Single-scale correlation response grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Response {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    /// Argmax with ties broken toward lower row, then lower column.
    pub fn peak(&self) -> (usize, usize, f64) {
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.get(r, c);
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        best
    }
}

/// Per-scale responses and the global best peak.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub per_scale: Vec<Response>,
    /// (scale index, row, col, score); ties resolve to the lower scale
    /// index, then lower row, then lower column.
    pub best: (usize, usize, usize, f64),
}

impl ResponseMap {
    pub fn from_scales(per_scale: Vec<Response>) -> Self {
        let mut best = (0usize, 0usize, 0usize, f64::NEG_INFINITY);
        for (si, resp) in per_scale.iter().enumerate() {
            let (r, c, v) = resp.peak();
            if v > best.3 {
                best = (si, r, c, v);
            }
        }
        Self { per_scale, best }
    }
}

/// Valid (no-padding) cross-correlation of `template` against `search`,
/// summed over the given template channels paired with the same-indexed
/// channels of the search map.
pub fn correlate(template: &FeatureMap, search: &FeatureMap, selected: &[usize]) -> Result<Response> {
    if template.height > search.height || template.width > search.width {
        return Err(Error::InvalidArgument("template larger than search region".into()));
    }
    let search_sel = if search.channels == template.channels {
        None
    } else {
        Some(search.select_channels(selected)?)
    };
    let search = search_sel.as_ref().unwrap_or(search);
    if search.channels != template.channels {
        return Err(Error::InvalidArgument("channel counts incompatible after selection".into()));
    }
    let out_h = search.height - template.height + 1;
    let out_w = search.width - template.width + 1;
    let mut data = vec![0.0; out_h * out_w];
    for ch in 0..template.channels {
        for r in 0..out_h {
            for c in 0..out_w {
                let mut acc = 0.0;
                for tr in 0..template.height {
                    for tc in 0..template.width {
                        acc += template.get(tr, tc, ch) * search.get(r + tr, c + tc, ch);
                    }
                }
                data[r * out_w + c] += acc;
            }
        }
    }
    Ok(Response { height: out_h, width: out_w, data })
}

/// State carried between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub center: (f64, f64),
    pub target_size: (f64, f64),
    pub scale: f64,
    pub template: FeatureMap,
    pub selected: Vec<usize>,
    pub config: TrackerConfig,
}

fn target_extent(w: f64, h: f64) -> f64 {
    (w * h).sqrt()
}

/// Template analysis shared by [`init`] and channel inspection: extract
/// template features, train the regression net against a Gaussian label map,
/// score every channel, and select the top-k.
pub fn analyze_template(
    frame: &Frame,
    bbox: BBox,
    cfg: &TrackerConfig,
) -> Result<(FeatureMap, ChannelScores, Vec<usize>)> {
    cfg.validate()?;
    if bbox.w < 2.0 || bbox.h < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "degenerate bbox {}x{}",
            bbox.w, bbox.h
        )));
    }
    let crop = target_extent(bbox.w, bbox.h);
    let patch = extract_patch(frame, (bbox.cy, bbox.cx), crop, cfg.template_size)?;
    let features = extract_features(&patch, &cfg.extractor)?;

    // label geometry in feature cells
    let px_per_cell = cfg.extractor.stride as f64;
    let cells_per_px = cfg.template_size as f64 / crop / px_per_cell;
    let tw_cells = bbox.w * cells_per_px;
    let th_cells = bbox.h * cells_per_px;
    let sigma = (cfg.sigma_factor * (tw_cells * th_cells).sqrt()).max(0.5);
    let center = (
        (features.height - 1) as f64 / 2.0,
        (features.width - 1) as f64 / 2.0,
    );
    let labels = gaussian_label(features.height, features.width, center, sigma)?;

    let mut net = RidgeNet::new(features.channels, cfg.lambda, cfg.train.seed);
    train_net(&mut net, &features, labels.values(), &cfg.loss, &cfg.train)?;
    let scores = channel_scores(&net, &features, labels.values(), &cfg.loss)?;
    let k = cfg.top_k.min(features.channels);
    let selected = select_top_k(&scores, k)?;
    Ok((features, scores, selected))
}

/// Initialize on the first frame: run the template analysis and keep the
/// template restricted to the selected channels.
pub fn init(frame: &Frame, bbox: BBox, cfg: &TrackerConfig) -> Result<TrackState> {
    let (features, _, selected) = analyze_template(frame, bbox, cfg)?;
    let template = features.select_channels(&selected)?;

    Ok(TrackState {
        center: (bbox.cx, bbox.cy),
        target_size: (bbox.w, bbox.h),
        scale: 1.0,
        template,
        selected,
        config: cfg.clone(),
    })
}

/// 3x3 quadratic fit around an interior peak; returns a sub-cell offset in
/// [-0.5, 0.5] per axis.
fn refine_peak(resp: &Response, r: usize, c: usize) -> (f64, f64) {
    let axis = |lo: f64, mid: f64, hi: f64| {
        let denom = lo - 2.0 * mid + hi;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            (0.5 * (lo - hi) / denom).clamp(-0.5, 0.5)
        }
    };
    let dr = if r > 0 && r + 1 < resp.height {
        axis(resp.get(r - 1, c), resp.get(r, c), resp.get(r + 1, c))
    } else {
        0.0
    };
    let dc = if c > 0 && c + 1 < resp.width {
        axis(resp.get(r, c - 1), resp.get(r, c), resp.get(r, c + 1))
    } else {
        0.0
    };
    (dr, dc)
}

fn cosine_window(resp: &Response) -> Response {
    use std::f64::consts::PI;
    let hann = |i: usize, n: usize| {
        if n == 1 {
            1.0
        } else {
            0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
        }
    };
    let mut data = resp.data.clone();
    for r in 0..resp.height {
        for c in 0..resp.width {
            data[r * resp.width + c] *= hann(r, resp.height) * hann(c, resp.width);
        }
    }
    Response { height: resp.height, width: resp.width, data }
}

/// Advance one frame: correlate over the scale pyramid, move the center to
/// the best peak, and blend the scale toward the winning pyramid level.
pub fn step(state: &TrackState, frame: &Frame) -> Result<(TrackState, BBox)> {
    let cfg = &state.config;
    let extent = target_extent(state.target_size.0, state.target_size.1) * state.scale;
    let factors = cfg.pyramid();

    let mut responses = Vec::with_capacity(factors.len());
    let mut crops = Vec::with_capacity(factors.len());
    for &f in &factors {
        let crop = cfg.search_context * extent * f;
        let patch = extract_patch(frame, (state.center.1, state.center.0), crop, cfg.search_size)
            .map_err(|_| Error::LostTarget)?;
        let features = extract_features(&patch, &cfg.extractor)?;
        let resp = correlate(&state.template, &features, &state.selected)?;
        responses.push(if cfg.cosine_window { cosine_window(&resp) } else { resp });
        crops.push(crop);
    }
    let map = ResponseMap::from_scales(responses);
    let (si, pr, pc, _) = map.best;
    let resp = &map.per_scale[si];

    let (mut fr, mut fc) = (pr as f64, pc as f64);
    if cfg.subcell_refine {
        let (dr, dc) = refine_peak(resp, pr, pc);
        fr += dr;
        fc += dc;
    }
    let disp_r = fr - (resp.height - 1) as f64 / 2.0;
    let disp_c = fc - (resp.width - 1) as f64 / 2.0;
    // cells -> patch pixels -> image pixels
    let px = cfg.extractor.stride as f64 * crops[si] / cfg.search_size as f64;
    let center = (state.center.0 + disp_c * px, state.center.1 + disp_r * px);

    let chosen = state.scale * factors[si];
    let scale = (1.0 - cfg.scale_lerp) * state.scale + cfg.scale_lerp * chosen;

    let bbox = BBox::new(
        center.0,
        center.1,
        state.target_size.0 * scale,
        state.target_size.1 * scale,
    );
    let mut next = state.clone();
    next.center = center;
    next.scale = scale;
    Ok((next, bbox))
}
