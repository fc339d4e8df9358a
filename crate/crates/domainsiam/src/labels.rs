//! Gaussian soft-label maps.

use crate::error::{Error, Result};

/// H x W grid of Gaussian label values peaking at `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub center: (f64, f64),
    pub sigma: f64,
    values: Vec<f64>,
}

impl LabelMap {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Default kernel width: proportional to target extent in feature cells.
pub fn default_sigma(target_w: f64, target_h: f64) -> f64 {
    0.1 * (target_w * target_h).sqrt()
}

/// Build the label grid `exp(-(dr^2 + dc^2) / (2 sigma^2))`, with `(dr, dc)`
/// the offset of each cell from `center` in (row, col) coordinates.
pub fn gaussian_label(
    height: usize,
    width: usize,
    center: (f64, f64),
    sigma: f64,
) -> Result<LabelMap> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument("label grid must be non-empty".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let (cr, cc) = center;
    if !(cr >= 0.0 && cr <= (height - 1) as f64 && cc >= 0.0 && cc <= (width - 1) as f64) {
        return Err(Error::InvalidArgument(format!(
            "center ({cr}, {cc}) outside {height}x{width} grid"
        )));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut values = Vec::with_capacity(height * width);
    for r in 0..height {
        let dr = r as f64 - cr;
        for c in 0..width {
            let dc = c as f64 - cc;
            values.push((-(dr * dr + dc * dc) * inv).exp());
        }
    }
    Ok(LabelMap { height, width, center, sigma, values })
}
