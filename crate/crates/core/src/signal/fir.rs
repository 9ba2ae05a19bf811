use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FeatureGrid;
use crate::error::{Error, Result};

/// Zero-crossings of the sinc kept on each side of the center.
pub const DEFAULT_HALF_WIDTH: f64 = 6.0;
pub const DEFAULT_BETA: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "window", rename_all = "snake_case")]
pub enum FirDesign {
    Kaiser { beta: f64, half_width: f64 },
}

/// Odd-length, symmetric, unit-DC-gain FIR low-pass, applied separably.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    taps: Vec<f64>,
    cutoff_frac: f64,
    design: FirDesign,
}

/// How samples outside the grid are treated by [`filter2d`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Zero,
    /// Replicate the edge sample.
    Clamp,
}

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Normalized sinc with exact zeros at nonzero integers.
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc. `cutoff_frac` is in cycles per sample (0.5 = Nyquist);
/// the filter spans `half_width` sinc zero-crossings on each side, i.e.
/// `2 * round(half_width / (2 * cutoff)) + 1` taps.
pub fn design_lowpass(cutoff_frac: f64, half_width: f64, beta: f64) -> Result<FirFilter> {
    if !(cutoff_frac > 0.0 && cutoff_frac <= 0.5) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff_frac} outside (0, 0.5]")));
    }
    if !(half_width >= 1.0 && half_width.is_finite()) {
        return Err(Error::InvalidArgument(format!("half_width {half_width} must be >= 1")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("Kaiser beta {beta} must be >= 0")));
    }
    let n_half = (half_width / (2.0 * cutoff_frac)).round().max(1.0) as usize;
    let norm = bessel_i0(beta);
    // Build one side and mirror so symmetry is exact.
    let side: Vec<f64> = (0..=n_half)
        .map(|k| {
            let x = k as f64;
            let ratio = x / n_half as f64;
            let window = bessel_i0(beta * (1.0 - ratio * ratio).max(0.0).sqrt()) / norm;
            2.0 * cutoff_frac * sinc(2.0 * cutoff_frac * x) * window
        })
        .collect();
    let mut taps: Vec<f64> = side.iter().rev().chain(&side[1..]).copied().collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(FirFilter {
        taps,
        cutoff_frac,
        design: FirDesign::Kaiser { beta, half_width },
    })
}

impl FirFilter {
    /// Pass-through filter `[1]`.
    pub fn identity() -> Self {
        Self {
            taps: vec![1.0],
            cutoff_frac: 0.5,
            design: FirDesign::Kaiser { beta: 0.0, half_width: 0.0 },
        }
    }

    pub fn from_taps(taps: Vec<f64>) -> Result<Self> {
        let n = taps.len();
        if n.is_multiple_of(2) || (0..n).any(|k| taps[k] != taps[n - 1 - k]) {
            return Err(Error::InvalidArgument("taps must be odd-length and symmetric".into()));
        }
        Ok(Self {
            taps,
            cutoff_frac: 0.5,
            design: FirDesign::Kaiser { beta: 0.0, half_width: 0.0 },
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
    pub fn cutoff_frac(&self) -> f64 {
        self.cutoff_frac
    }
    pub fn design(&self) -> FirDesign {
        self.design
    }

    /// Samples on each side of the center tap.
    pub fn half_len(&self) -> usize {
        self.taps.len() / 2
    }

    /// Zero-phase frequency response at `freq` cycles/sample.
    pub fn response(&self, freq: f64) -> f64 {
        let h = self.half_len();
        let mut acc = self.taps[h];
        for k in 1..=h {
            acc += 2.0 * self.taps[h + k] * (2.0 * PI * freq * k as f64).cos();
        }
        acc
    }

    /// 1-D convolution of a strided line, summing taps in ascending order.
    #[inline]
    fn apply_line(&self, src: &[f64], len: usize, stride: usize, channels: usize, pos: usize, boundary: Boundary, out: &mut [f64]) {
        let h = self.half_len() as i64;
        out.fill(0.0);
        for (k, &tap) in self.taps.iter().enumerate() {
            let mut i = pos as i64 + k as i64 - h;
            if i < 0 || i >= len as i64 {
                match boundary {
                    Boundary::Zero => continue,
                    Boundary::Clamp => i = i.clamp(0, len as i64 - 1),
                }
            }
            let s = &src[i as usize * stride..i as usize * stride + channels];
            for (o, v) in out.iter_mut().zip(s) {
                *o += tap * v;
            }
        }
    }
}

/// Horizontal pass at the requested output columns, every row.
pub(super) fn filter_rows(g: &FeatureGrid, f: &FirFilter, cols: &[usize], boundary: Boundary) -> Vec<f64> {
    let (h, w, c) = g.dims();
    let mut out = vec![0.0; h * cols.len() * c];
    for r in 0..h {
        let row = &g.data()[r * w * c..(r + 1) * w * c];
        for (j, &col) in cols.iter().enumerate() {
            let dst = &mut out[(r * cols.len() + j) * c..][..c];
            f.apply_line(row, w, c, c, col, boundary, dst);
        }
    }
    out
}

/// Vertical pass over a `h x w x c` buffer at the requested output rows.
pub(super) fn filter_cols(src: &[f64], h: usize, w: usize, c: usize, f: &FirFilter, rows: &[usize], boundary: Boundary) -> Vec<f64> {
    let mut out = vec![0.0; rows.len() * w * c];
    let mut line = vec![0.0; c];
    for col in 0..w {
        let column = &src[col * c..];
        for (i, &row) in rows.iter().enumerate() {
            f.apply_line(column, h, w * c, c, row, boundary, &mut line);
            out[(i * w + col) * c..][..c].copy_from_slice(&line);
        }
    }
    out
}

/// Separable convolution, rows then columns, channels independent.
pub fn filter2d(g: &FeatureGrid, f: &FirFilter, boundary: Boundary) -> Result<FeatureGrid> {
    let n = f.taps().len();
    if g.height() < n || g.width() < n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} grid is smaller than the {n}-tap filter",
            g.height(),
            g.width()
        )));
    }
    let (h, w, c) = g.dims();
    let all_cols: Vec<usize> = (0..w).collect();
    let all_rows: Vec<usize> = (0..h).collect();
    let tmp = filter_rows(g, f, &all_cols, boundary);
    let out = filter_cols(&tmp, h, w, c, f, &all_rows, boundary);
    Ok(FeatureGrid::from_vec(h, w, c, out, *g.transform()).expect("filter preserves shape"))
}
