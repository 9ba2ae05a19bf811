use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FeatureGrid;
use crate::bevmap::{GridTransform, WindowSpec};
use crate::error::{Error, Result};

/// Sinusoidal positional channels `a_i cos(2π b_i·v)`, `a_i sin(2π b_i·v)`.
/// Frequencies are in cycles per world unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierConfig {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<[f64; 2]>,
}

impl FourierConfig {
    /// `m` unit-amplitude frequencies, log-spaced in magnitude from
    /// `max_freq / 32` to `max_freq`, directions spread by the golden angle.
    pub fn isotropic(m: usize, max_freq: f64) -> Self {
        let golden = PI * (3.0 - 5f64.sqrt());
        let lo = max_freq / 32.0;
        let frequencies = (0..m)
            .map(|k| {
                let t = if m > 1 { k as f64 / (m - 1) as f64 } else { 1.0 };
                let mag = lo * (max_freq / lo).powf(t);
                let theta = k as f64 * golden;
                [mag * theta.cos(), mag * theta.sin()]
            })
            .collect();
        Self { amplitudes: vec![1.0; m], frequencies }
    }

    /// Default for a grid with `scale` pixels per world unit: `channels / 2`
    /// frequencies reaching 90% of the per-axis Nyquist rate.
    pub fn for_grid(channels: usize, scale: f64) -> Self {
        Self::isotropic((channels / 2).max(1), 0.9 * 0.5 * scale)
    }

    pub fn channels(&self) -> usize {
        2 * self.amplitudes.len()
    }

    pub fn validate(&self, transform: &GridTransform) -> Result<()> {
        if self.amplitudes.is_empty() || self.amplitudes.len() != self.frequencies.len() {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes for {} frequencies",
                self.amplitudes.len(),
                self.frequencies.len()
            )));
        }
        let nyquist = 0.5 * transform.scale;
        for (index, &[fx, fy]) in self.frequencies.iter().enumerate() {
            if !(fx.abs() < nyquist && fy.abs() < nyquist) {
                return Err(Error::AboveNyquist { index, fx, fy, nyquist });
            }
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Fourier amplitude".into()));
        }
        Ok(())
    }
}

/// Fourier features sampled at the GLOBAL world position of every pixel of
/// `window`, where `transform` places the global map. The result is placed
/// at the window.
pub fn fourier_grid(cfg: &FourierConfig, window: &WindowSpec, transform: &GridTransform) -> Result<FeatureGrid> {
    cfg.validate(transform)?;
    let local = transform.shifted(window.origin[0], window.origin[1]);
    let [h, w] = window.size;
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let m = cfg.amplitudes.len();
    let mut grid = FeatureGrid::zeros(h, w, 2 * m, local);
    for r in 0..h {
        for c in 0..w {
            let (x, y) = local.pixel_center(r, c);
            let px = grid.pixel_mut(r, c);
            for (i, (&a, &[bx, by])) in cfg.amplitudes.iter().zip(&cfg.frequencies).enumerate() {
                let phase = 2.0 * PI * (bx * x + by * y);
                let (s, co) = phase.sin_cos();
                px[2 * i] = a * co;
                px[2 * i + 1] = a * s;
            }
        }
    }
    Ok(grid)
}
