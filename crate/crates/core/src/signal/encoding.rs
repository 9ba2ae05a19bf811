use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FeatureGrid;

/// Sinusoidal embedding of a scalar with `n_freqs` octaves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    pub n_freqs: usize,
    pub base: f64,
}

impl Default for PeConfig {
    fn default() -> Self {
        Self { n_freqs: 4, base: 1.0 }
    }
}

impl PeConfig {
    pub fn dim(&self) -> usize {
        2 * self.n_freqs
    }

    /// Smallest shift of `z` that leaves every band unchanged (the period of the lowest band).
    pub fn period(&self) -> f64 {
        2.0 / self.base
    }
}

/// `[sin(2^l π base z), cos(2^l π base z)]` for `l = 0..L`, interleaved.
pub fn pe(z: f64, cfg: &PeConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.dim()];
    pe_into(z, cfg, &mut out);
    out
}

pub fn pe_into(z: f64, cfg: &PeConfig, out: &mut [f64]) {
    for l in 0..cfg.n_freqs {
        let (s, c) = ((1u64 << l) as f64 * PI * cfg.base * z).sin_cos();
        out[2 * l] = s;
        out[2 * l + 1] = c;
    }
}

/// Bilinear lookup at world `(x, y)`; positions outside the grid clamp to the border pixel.
pub fn bilinear_sample(g: &FeatureGrid, x: f64, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.channels()];
    bilinear_sample_into(g, x, y, &mut out);
    out
}

#[inline]
pub fn bilinear_sample_into(g: &FeatureGrid, x: f64, y: f64, out: &mut [f64]) {
    let (gc, gr) = g.transform().to_grid(x, y);
    let axis = |v: f64, len: usize| -> (usize, usize, f64) {
        let u = (v - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = (u.floor() as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, u - i0 as f64)
    };
    let (c0, c1, fc) = axis(gc, g.width());
    let (r0, r1, fr) = axis(gr, g.height());
    let (a, b, c, d) = (g.pixel(r0, c0), g.pixel(r0, c1), g.pixel(r1, c0), g.pixel(r1, c1));
    for (ch, o) in out.iter_mut().enumerate() {
        let top = (1.0 - fc) * a[ch] + fc * b[ch];
        let bottom = (1.0 - fc) * c[ch] + fc * d[ch];
        *o = (1.0 - fr) * top + fr * bottom;
    }
}
