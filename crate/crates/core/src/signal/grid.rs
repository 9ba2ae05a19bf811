use serde::{Deserialize, Serialize};

use crate::bevmap::{BevMap, GridTransform};
use crate::container;
use crate::error::{Error, Result};

pub const FGRID_MAGIC: &[u8; 8] = b"FGRID001";

/// Dense `height x width x channels` grid, row-major and channel-minor, placed
/// in the world by a [`GridTransform`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    transform: GridTransform,
}

impl FeatureGrid {
    pub fn zeros(height: usize, width: usize, channels: usize, transform: GridTransform) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
            transform,
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>, transform: GridTransform) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::ShapeMismatch(format!("grid dims must be positive, got {height}x{width}x{channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {height}x{width}x{channels} grid",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at flat index {i}")));
        }
        Ok(Self { height, width, channels, data, transform })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        transform: GridTransform,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self { height, width, channels, data, transform }
    }

    /// BEV content as features, same placement.
    pub fn from_bev(map: &BevMap) -> Self {
        Self {
            height: map.height(),
            width: map.width(),
            channels: map.channels(),
            data: map.grid().iter().map(|&v| v as f64).collect(),
            transform: *map.transform(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn transform(&self) -> &GridTransform {
        &self.transform
    }

    pub fn with_transform(mut self, transform: GridTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        (row * self.width + col) * self.channels
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = self.index(row, col);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let i = self.index(row, col);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col) + ch]
    }

    /// Stacks channels of two same-sized grids (self first).
    pub fn concat_channels(&self, other: &FeatureGrid) -> Result<FeatureGrid> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::ShapeMismatch(format!(
                "cannot concat {}x{} with {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let c = self.channels + other.channels;
        let mut data = Vec::with_capacity(self.height * self.width * c);
        for (a, b) in self.data.chunks_exact(self.channels).zip(other.data.chunks_exact(other.channels)) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(FeatureGrid { channels: c, data, ..self.clone_header() })
    }

    fn clone_header(&self) -> FeatureGrid {
        FeatureGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: Vec::new(),
            transform: self.transform,
        }
    }

    /// Content shifted by `dx` columns and `dy` rows with zero fill. Placement is unchanged.
    pub fn shifted(&self, dx: i64, dy: i64) -> FeatureGrid {
        let mut out = FeatureGrid::zeros(self.height, self.width, self.channels, self.transform);
        for r in 0..self.height as i64 {
            let sr = r - dy;
            if sr < 0 || sr >= self.height as i64 {
                continue;
            }
            for c in 0..self.width as i64 {
                let sc = c - dx;
                if sc < 0 || sc >= self.width as i64 {
                    continue;
                }
                let (d, s) = (out.index(r as usize, c as usize), self.index(sr as usize, sc as usize));
                out.data[d..d + self.channels].copy_from_slice(&self.data[s..s + self.channels]);
            }
        }
        out
    }

    /// Largest absolute difference over pixels at least `border` away from every edge.
    pub fn max_abs_diff_interior(&self, other: &FeatureGrid, border: usize) -> f64 {
        assert_eq!(self.dims(), other.dims());
        let mut worst = 0.0f64;
        for r in border..self.height.saturating_sub(border) {
            for c in border..self.width.saturating_sub(border) {
                for (a, b) in self.pixel(r, c).iter().zip(other.pixel(r, c)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeatureGrid {
        FeatureGrid { data: self.data.iter().map(|&v| f(v)).collect(), ..self.clone_header() }
    }

    /// `alpha * self + other`.
    pub fn axpy(&self, alpha: f64, other: &FeatureGrid) -> FeatureGrid {
        assert_eq!(self.dims(), other.dims());
        FeatureGrid {
            data: self.data.iter().zip(&other.data).map(|(a, b)| alpha * a + b).collect(),
            ..self.clone_header()
        }
    }

    /// FGRID container; values are stored losslessly as f64.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = GridHeader {
            h: self.height,
            w: self.width,
            c: self.channels,
            world_to_grid: self.transform,
            dtype: Dtype::F64,
        };
        container::encode(FGRID_MAGIC, &header, &container::f64_payload(self.data.iter().copied()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, payload): (GridHeader, _) = container::decode(FGRID_MAGIC, bytes)?;
        let n = container::checked_volume(&[h.h, h.w, h.c])?;
        let data = match h.dtype {
            Dtype::F64 => container::read_f64s(payload, n)?,
            Dtype::F32 => container::read_f32s(payload, n)?.into_iter().map(f64::from).collect(),
        };
        Self::from_vec(h.h, h.w, h.c, data, h.world_to_grid)
    }
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum Dtype {
    F32,
    F64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridHeader {
    h: usize,
    w: usize,
    c: usize,
    world_to_grid: GridTransform,
    dtype: Dtype,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fgrid_round_trip(h in 1usize..6, w in 1usize..6, c in 1usize..4, seed in any::<u64>()) {
            let g = FeatureGrid::from_fn(h, w, c, GridTransform::new(2.0, [0.5, -1.0]), |r, cc, ch| {
                ((seed as f64) * 1e-3 + (r * 31 + cc * 7 + ch) as f64).sin()
            });
            let back = FeatureGrid::from_bytes(&g.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, g);
        }
    }

    #[test]
    fn shifted_moves_content() {
        let g = FeatureGrid::from_fn(4, 4, 1, GridTransform::default(), |r, c, _| (r * 4 + c) as f64);
        let s = g.shifted(1, 2);
        assert_eq!(s.get(2, 1, 0), g.get(0, 0, 0));
        assert_eq!(s.get(0, 0, 0), 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FeatureGrid::from_vec(2, 2, 1, vec![0.0; 3], GridTransform::default()).is_err());
        assert!(FeatureGrid::from_vec(1, 1, 1, vec![f64::NAN], GridTransform::default()).is_err());
        assert!(FeatureGrid::from_bytes(b"FGRID001\x02\x00\x00\x00{}").is_err());
    }
}
