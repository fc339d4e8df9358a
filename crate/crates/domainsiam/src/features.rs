//! Frames, patch extraction, and pluggable feature extractors.
//!
//! The extractors here stand in for a pretrained backbone: `raw` passes the
//! patch through, `gradients` emits central-difference maps, and
//! `random_filters` cross-correlates a seeded fixed filter bank.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale frame with pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("frame must be non-empty".into()));
        }
        if pixels.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "pixel buffer length {} does not match {height}x{width}",
                pixels.len()
            )));
        }
        if !pixels.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("pixels must lie in [0, 1]".into()));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    fn get_clamped(&self, row: i64, col: i64) -> f64 {
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        self.get(r, c)
    }

    /// Bilinear sample at real (row, col); caller guarantees in-frame bounds.
    fn sample(&self, row: f64, col: f64) -> f64 {
        let r0 = row.floor() as i64;
        let c0 = col.floor() as i64;
        let fr = row - r0 as f64;
        let fc = col - c0 as f64;
        let v00 = self.get_clamped(r0, c0);
        let v01 = self.get_clamped(r0, c0 + 1);
        let v10 = self.get_clamped(r0 + 1, c0);
        let v11 = self.get_clamped(r0 + 1, c0 + 1);
        v00 * (1.0 - fr) * (1.0 - fc)
            + v01 * (1.0 - fr) * fc
            + v10 * fr * (1.0 - fc)
            + v11 * fr * fc
    }

    /// Read a binary PGM (P5, maxval 255); values map to `[0, 1]`.
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        parse_pgm(&bytes)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.pixels.len() + 32);
        out.extend_from_slice(format!("P5\n{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend(self.pixels.iter().map(|&p| (p * 255.0).round() as u8));
        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<Frame> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and # comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("unexpected end of PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(bytes)?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected P5, got {magic}")));
    }
    let width: usize = token(bytes)?.parse().map_err(|_| Error::Format("bad width".into()))?;
    let height: usize = token(bytes)?.parse().map_err(|_| Error::Format("bad height".into()))?;
    let maxval: usize = token(bytes)?.parse().map_err(|_| Error::Format("bad maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Format(format!("only maxval 255 is supported, got {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let data = &bytes[pos..];
    if data.len() < width * height {
        return Err(Error::Format("truncated PGM payload".into()));
    }
    let pixels = data[..width * height].iter().map(|&b| b as f64 / 255.0).collect();
    Frame::new(height, width, pixels)
}

/// H x W x C feature tensor, channel-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Feature cells advance this many image pixels per step.
    pub stride: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, stride: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 || stride == 0 {
            return Err(Error::InvalidArgument("feature map dims and stride must be positive".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("feature values must be finite".into()));
        }
        Ok(Self { height, width, channels, stride, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize, stride: usize) -> Self {
        Self {
            height,
            width,
            channels,
            stride,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(channel * self.height + row) * self.width + col] = value;
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[channel * plane..(channel + 1) * plane]
    }

    /// Copy of this map restricted to the given channel indices, in order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("channel selection is empty".into()));
        }
        let plane = self.height * self.width;
        let mut data = Vec::with_capacity(indices.len() * plane);
        for &i in indices {
            if i >= self.channels {
                return Err(Error::InvalidArgument(format!(
                    "channel {i} out of range (C = {})",
                    self.channels
                )));
            }
            data.extend_from_slice(self.channel(i));
        }
        FeatureMap::new(self.height, self.width, indices.len(), self.stride, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Raw,
    Gradients,
    RandomFilters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSpec {
    pub kind: ExtractorKind,
    pub filter_count: usize,
    pub filter_size: usize,
    pub seed: u64,
    pub stride: usize,
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        Self {
            kind: ExtractorKind::Gradients,
            filter_count: 8,
            filter_size: 3,
            seed: 0,
            stride: 1,
        }
    }
}

impl ExtractorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.filter_count == 0 {
            return Err(Error::InvalidArgument("filter_count must be >= 1".into()));
        }
        if self.filter_size % 2 == 0 {
            return Err(Error::InvalidArgument("filter_size must be odd".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        match self.kind {
            ExtractorKind::Raw => 1,
            ExtractorKind::Gradients => 2,
            ExtractorKind::RandomFilters => self.filter_count,
        }
    }
}

/// Square crop of side `crop_size` centered at `center` (row, col),
/// bilinearly resampled to `out_size` x `out_size`. Sample positions falling
/// outside the frame are filled with the mean of the in-frame samples.
pub fn extract_patch(
    frame: &Frame,
    center: (f64, f64),
    crop_size: f64,
    out_size: usize,
) -> Result<Frame> {
    if !(crop_size > 0.0) || out_size == 0 {
        return Err(Error::InvalidArgument("crop_size and out_size must be positive".into()));
    }
    let scale = crop_size / out_size as f64;
    let origin_r = center.0 - crop_size / 2.0;
    let origin_c = center.1 - crop_size / 2.0;
    let coord = |u: usize, origin: f64| origin + (u as f64 + 0.5) * scale - 0.5;
    let in_frame = |r: f64, c: f64| {
        r >= 0.0 && r <= frame.height as f64 - 1.0 && c >= 0.0 && c <= frame.width as f64 - 1.0
    };

    let mut sum = 0.0;
    let mut count = 0usize;
    for u in 0..out_size {
        let r = coord(u, origin_r);
        for v in 0..out_size {
            let c = coord(v, origin_c);
            if in_frame(r, c) {
                sum += frame.sample(r, c);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("crop has no overlap with the frame".into()));
    }
    let fill = sum / count as f64;

    let mut pixels = Vec::with_capacity(out_size * out_size);
    for u in 0..out_size {
        let r = coord(u, origin_r);
        for v in 0..out_size {
            let c = coord(v, origin_c);
            pixels.push(if in_frame(r, c) { frame.sample(r, c) } else { fill });
        }
    }
    Frame::new(out_size, out_size, pixels)
}

/// Seeded fixed filter bank for the `random_filters` extractor.
fn filter_bank(spec: &ExtractorSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    (0..spec.filter_count)
        .map(|_| {
            (0..spec.filter_size * spec.filter_size)
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect()
        })
        .collect()
}

pub fn extract_features(patch: &Frame, spec: &ExtractorSpec) -> Result<FeatureMap> {
    spec.validate()?;
    if patch.height != patch.width {
        return Err(Error::InvalidArgument("patch must be square".into()));
    }
    let (h, w) = (patch.height, patch.width);
    match spec.kind {
        ExtractorKind::Raw => FeatureMap::new(h, w, 1, 1, patch.pixels().to_vec()),
        ExtractorKind::Gradients => {
            let mut data = Vec::with_capacity(2 * h * w);
            // horizontal central differences, clamped at borders
            for r in 0..h {
                for c in 0..w {
                    let right = patch.get_clamped(r as i64, c as i64 + 1);
                    let left = patch.get_clamped(r as i64, c as i64 - 1);
                    data.push(0.5 * (right - left));
                }
            }
            // vertical
            for r in 0..h {
                for c in 0..w {
                    let down = patch.get_clamped(r as i64 + 1, c as i64);
                    let up = patch.get_clamped(r as i64 - 1, c as i64);
                    data.push(0.5 * (down - up));
                }
            }
            FeatureMap::new(h, w, 2, 1, data)
        }
        ExtractorKind::RandomFilters => {
            let f = spec.filter_size;
            if h < f {
                return Err(Error::InvalidArgument("patch smaller than filter".into()));
            }
            let out_h = (h - f) / spec.stride + 1;
            let out_w = (w - f) / spec.stride + 1;
            let bank = filter_bank(spec);
            let mut data = Vec::with_capacity(bank.len() * out_h * out_w);
            for filter in &bank {
                for or in 0..out_h {
                    for oc in 0..out_w {
                        let (r0, c0) = (or * spec.stride, oc * spec.stride);
                        let mut acc = 0.0;
                        for fr in 0..f {
                            for fc in 0..f {
                                acc += filter[fr * f + fc] * patch.get(r0 + fr, c0 + fc);
                            }
                        }
                        data.push(acc);
                    }
                }
            }
            FeatureMap::new(out_h, out_w, bank.len(), spec.stride, data)
        }
    }
}
