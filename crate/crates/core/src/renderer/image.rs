use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::bevmap::GridTransform;
use crate::container;
use crate::error::{Error, Result};
use crate::signal::FeatureGrid;

pub const IMGF_MAGIC: &[u8; 8] = b"IMGF0001";

/// Row-major RGB image with values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImgfHeader {
    h: usize,
    w: usize,
    c: usize,
    dtype: String,
}

impl Image {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width * 3] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::ShapeMismatch(format!("{} values for a {height}x{width} RGB image", data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut img = Self::new(height, width);
        for r in 0..height {
            for c in 0..width {
                img.set(r, c, f(r, c));
            }
        }
        img
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, r: usize, c: usize) -> [f64; 3] {
        let i = (r * self.width + c) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, r: usize, c: usize, v: [f64; 3]) {
        let i = (r * self.width + c) * 3;
        self.data[i..i + 3].copy_from_slice(&v);
    }

    pub fn to_grid(&self) -> FeatureGrid {
        FeatureGrid::from_vec(self.height, self.width, 3, self.data.clone(), GridTransform::new(1.0, [0.0, 0.0]))
            .expect("dimensions agree")
    }

    pub fn from_grid(g: &FeatureGrid) -> Result<Self> {
        if g.channels() != 3 {
            return Err(Error::ShapeMismatch(format!("image grid needs 3 channels, got {}", g.channels())));
        }
        Self::from_vec(g.height(), g.width(), g.data().to_vec())
    }

    /// Content moved by `(dx, dy)` pixels; vacated pixels are zero.
    pub fn shifted(&self, dx: i64, dy: i64) -> Image {
        Self::from_grid(&self.to_grid().shifted(dx, dy)).expect("three channels")
    }

    /// Columns `[start, start + n)`.
    pub fn columns(&self, start: usize, n: usize) -> Result<Image> {
        if start + n > self.width {
            return Err(Error::InvalidArgument(format!(
                "columns {start}..{} outside a {}-wide image",
                start + n,
                self.width
            )));
        }
        Ok(Self::from_fn(self.height, n, |r, c| self.pixel(r, start + c)))
    }

    /// Side-by-side concatenation.
    pub fn hconcat(parts: &[Image]) -> Result<Image> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.height != first.height) {
            return Err(Error::ShapeMismatch("concatenated images differ in height".into()));
        }
        let width = parts.iter().map(|p| p.width).sum();
        let mut data = Vec::with_capacity(first.height * width * 3);
        for r in 0..first.height {
            for p in parts {
                data.extend_from_slice(&p.data[r * p.width * 3..(r + 1) * p.width * 3]);
            }
        }
        Self::from_vec(first.height, width, data)
    }

    fn check_same(&self, other: &Image) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    pub fn mean_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum();
        Ok(s / self.data.len() as f64)
    }

    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Root-mean-square difference.
    pub fn rms_diff(&self, other: &Image) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((s / self.data.len() as f64).sqrt())
    }

    /// Mean squared difference between horizontally and vertically adjacent pixels.
    pub fn high_frequency_energy(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in 0..self.height {
            for c in 0..self.width {
                let p = self.pixel(r, c);
                for q in [(c + 1 < self.width).then(|| self.pixel(r, c + 1)), (r + 1 < self.height).then(|| self.pixel(r + 1, c))]
                    .into_iter()
                    .flatten()
                {
                    sum += (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
                    n += 3;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// 8-bit RGB PNG, clamped to `[0, 1]`, optionally sRGB-encoded.
    pub fn to_png(&self, srgb: bool) -> Result<Vec<u8>> {
        let encode = |v: f64| {
            let v = v.clamp(0.0, 1.0);
            let v = if srgb {
                if v <= 0.0031308 {
                    12.92 * v
                } else {
                    1.055 * v.powf(1.0 / 2.4) - 0.055
                }
            } else {
                v
            };
            (v * 255.0).round() as u8
        };
        let w = u32::try_from(self.width).map_err(|_| Error::InvalidArgument("image too wide".into()))?;
        let h = u32::try_from(self.height).map_err(|_| Error::InvalidArgument("image too tall".into()))?;
        let buf = image::RgbImage::from_raw(w, h, self.data.iter().map(|&v| encode(v)).collect())
            .ok_or_else(|| Error::Image("buffer size mismatch".into()))?;
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = ImgfHeader { h: self.height, w: self.width, c: 3, dtype: "f32".into() };
        container::encode(IMGF_MAGIC, &header, &container::f32_payload(self.data.iter().map(|&v| v as f32)))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload): (ImgfHeader, _) = container::decode(IMGF_MAGIC, bytes)?;
        if header.c != 3 || header.dtype != "f32" {
            return Err(Error::Format(format!("unsupported image layout c={} dtype={}", header.c, header.dtype)));
        }
        let n = container::checked_volume(&[header.h, header.w, 3])?;
        let data = container::read_f32s(payload, n)?.into_iter().map(f64::from).collect();
        Self::from_vec(header.h, header.w, data)
    }
}
