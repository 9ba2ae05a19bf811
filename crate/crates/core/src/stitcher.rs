//! Sliding-window traversal of a large BEV map and strip stitching into panoramas.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bevmap::{BevMap, WindowSpec};
use crate::error::{Error, Result};
use crate::generator::RadianceField;
use crate::renderer::{render, Camera, Image, Projection, RenderSettings};

/// Direction the window slides along the BEV map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Toward increasing columns (+x).
    #[default]
    Columns,
    /// Toward increasing rows (+y).
    Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchConfig {
    /// `(h, w)` in BEV pixels.
    pub window: [usize; 2],
    pub n_step: usize,
    pub frame_w: usize,
    pub frame_h: usize,
    pub f_norm: f64,
    #[serde(default)]
    pub axis: Axis,
    /// Offset of every window across the traversal axis, BEV pixels.
    #[serde(default)]
    pub cross_offset: i64,
    pub n_samples: usize,
    #[serde(default = "one")]
    pub ssaa: usize,
    /// Height of the rig camera above the ground, world units.
    #[serde(default = "default_camera_height")]
    pub camera_height: f64,
}

fn one() -> usize {
    1
}

fn default_camera_height() -> f64 {
    1.0
}

impl StitchConfig {
    pub fn new(window: usize, n_step: usize) -> Self {
        Self {
            window: [window, window],
            n_step,
            frame_w: 64,
            frame_h: 64,
            f_norm: 1.0,
            axis: Axis::Columns,
            cross_offset: 0,
            n_samples: 32,
            ssaa: 1,
            camera_height: default_camera_height(),
        }
    }

    /// Image columns kept per frame: `round(n_step / f_norm)`.
    pub fn n_loc(&self) -> usize {
        (self.n_step as f64 / self.f_norm).round() as usize
    }

    /// First kept column. Ties between two middle positions go left.
    pub fn strip_start(&self) -> usize {
        (self.frame_w - self.n_loc()) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_step == 0 || !(self.f_norm > 0.0 && self.f_norm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need n_step >= 1 and f_norm > 0, got {} and {}",
                self.n_step, self.f_norm
            )));
        }
        if self.window.contains(&0) || self.frame_w == 0 || self.frame_h == 0 || self.n_samples == 0 || self.ssaa == 0 {
            return Err(Error::InvalidArgument("window, frame, samples and ssaa must be positive".into()));
        }
        let n_loc = self.n_loc();
        if n_loc == 0 || n_loc > self.frame_w {
            return Err(Error::InvalidArgument(format!(
                "n_loc {n_loc} must lie in 1..={} (n_step {}, f_norm {})",
                self.frame_w, self.n_step, self.f_norm
            )));
        }
        Ok(())
    }

    pub fn render_settings(&self) -> RenderSettings {
        RenderSettings::new(self.frame_w, self.frame_h, self.n_samples).with_ssaa(self.ssaa)
    }

    /// Distance ahead of the rig at which one BEV step moves the image by
    /// exactly `n_step / f_norm` columns.
    pub fn focus_depth(&self, scale: f64) -> f64 {
        self.f_norm * self.f_norm * self.frame_w as f64 / (2.0 * scale)
    }

    /// Default rig in the window-local frame: a level pinhole camera looking
    /// across the traversal axis with image columns running along it, set back
    /// so the window's middle line sits at [`focus_depth`](Self::focus_depth).
    pub fn rig(&self, scale: f64) -> Result<Camera> {
        let (h, w) = (self.window[0] as f64 / scale, self.window[1] as f64 / scale);
        let d = self.focus_depth(scale);
        let z = self.camera_height;
        let (pos, target) = match self.axis {
            Axis::Columns => ([0.5 * w, 0.5 * h - d, z], [0.5 * w, 0.5 * h, z]),
            Axis::Rows => ([0.5 * w + d, 0.5 * h, z], [0.5 * w, 0.5 * h, z]),
        };
        let far = d + w.max(h) + 16.0 * z.max(1.0);
        Camera::look_at(pos, target, [0.0, 0.0, 1.0], Projection::Pinhole { f_norm: self.f_norm }, 0.05, far)
    }
}

/// Windows at `k * n_step` along the axis for `k = 0..K`,
/// `K = floor((extent - window) / n_step) + 1`.
pub fn slide(global: &BevMap, cfg: &StitchConfig) -> Result<Vec<WindowSpec>> {
    cfg.validate()?;
    let [wh, ww] = cfg.window;
    let (extent, size) = match cfg.axis {
        Axis::Columns => (global.width(), ww),
        Axis::Rows => (global.height(), wh),
    };
    if size > extent {
        return Err(Error::WindowOutOfBounds {
            row: 0,
            col: 0,
            h: wh,
            w: ww,
            map_h: global.height(),
            map_w: global.width(),
        });
    }
    let k = (extent - size) / cfg.n_step + 1;
    let windows: Vec<WindowSpec> = (0..k as i64)
        .map(|i| {
            let along = i * cfg.n_step as i64;
            match cfg.axis {
                Axis::Columns => WindowSpec::new(cfg.cross_offset, along, wh, ww),
                Axis::Rows => WindowSpec::new(along, cfg.cross_offset, wh, ww),
            }
        })
        .collect();
    for w in &windows {
        w.check_inside(global.height(), global.width())?;
    }
    Ok(windows)
}

pub type FieldFactory<'a> = dyn Fn(&BevMap, &WindowSpec) -> Result<Box<dyn RadianceField + Send>> + Sync + 'a;

/// One frame per window, rendered through the same window-relative `rig`.
/// `progress(done, total)` is called as frames finish.
pub fn traverse(
    factory: &FieldFactory<'_>,
    global: &BevMap,
    cfg: &StitchConfig,
    rig: &Camera,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<Image>> {
    let windows = slide(global, cfg)?;
    let settings = cfg.render_settings();
    let done = AtomicUsize::new(0);
    let total = windows.len();
    windows
        .par_iter()
        .map(|w| {
            let local = global.crop_window(w)?;
            let field = factory(&local, w)?;
            let img = render(field.as_ref(), rig, &settings)?;
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            Ok(img)
        })
        .collect()
}

/// Concatenates the `n_loc` middle columns of every frame.
pub fn stitch(frames: &[Image], cfg: &StitchConfig) -> Result<Image> {
    cfg.validate()?;
    let first = frames.first().ok_or_else(|| Error::InvalidArgument("no frames to stitch".into()))?;
    if frames.iter().any(|f| (f.height(), f.width()) != (first.height(), first.width())) {
        return Err(Error::ShapeMismatch("frames differ in size".into()));
    }
    if first.width() != cfg.frame_w {
        return Err(Error::ShapeMismatch(format!("frames are {} wide, config says {}", first.width(), cfg.frame_w)));
    }
    let strips = frames.iter().map(|f| f.columns(cfg.strip_start(), cfg.n_loc())).collect::<Result<Vec<_>>>()?;
    Image::hconcat(&strips)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_step: usize,
    pub n_loc: usize,
    pub f_norm: f64,
    pub strip_start: usize,
    /// `[h, w]`
    pub frame: [usize; 2],
    pub panorama: [usize; 2],
}

impl StitchReport {
    pub fn new(cfg: &StitchConfig, frames: usize, panorama: &Image) -> Self {
        Self {
            k: frames,
            n_step: cfg.n_step,
            n_loc: cfg.n_loc(),
            f_norm: cfg.f_norm,
            strip_start: cfg.strip_start(),
            frame: [cfg.frame_h, cfg.frame_w],
            panorama: [panorama.height(), panorama.width()],
        }
    }
}

/// Mean absolute difference between `a` column `p` and `b` column `p + offset`
/// over the columns both panoramas cover.
pub fn panorama_diff(a: &Image, b: &Image, offset: i64) -> Result<f64> {
    if a.height() != b.height() {
        return Err(Error::ShapeMismatch("panoramas differ in height".into()));
    }
    let lo = 0.max(-offset);
    let hi = (a.width() as i64).min(b.width() as i64 - offset);
    if lo >= hi {
        return Err(Error::InvalidArgument("panoramas do not overlap".into()));
    }
    let n = (hi - lo) as usize;
    let pa = a.columns(lo as usize, n)?;
    let pb = b.columns((lo + offset) as usize, n)?;
    pa.mean_abs_diff(&pb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bevmap::{rasterize, BevLayout};

    fn strip_map(w: usize) -> BevMap {
        rasterize(&[], &BevLayout::clevr(16, w, 0)).unwrap()
    }

    #[test]
    fn window_count_formula() {
        let cfg = StitchConfig { window: [16, 256], ..StitchConfig::new(256, 1) };
        assert_eq!(slide(&strip_map(300), &cfg).unwrap().len(), 45);
        let cfg = StitchConfig { window: [16, 300], ..cfg };
        assert_eq!(slide(&strip_map(300), &cfg).unwrap().len(), 1);
        let cfg = StitchConfig { window: [16, 301], ..cfg };
        assert!(slide(&strip_map(300), &cfg).is_err());
        let cfg = StitchConfig { window: [16, 64], n_step: 10, ..cfg };
        let w = slide(&strip_map(300), &cfg).unwrap();
        assert_eq!(w.len(), 24);
        assert_eq!(w[1].origin[1] - w[0].origin[1], 10);
    }

    #[test]
    fn n_loc_follows_focal_length() {
        for n in [1, 10, 20, 30, 40] {
            let cfg = StitchConfig::new(64, n);
            assert_eq!(cfg.n_loc(), n);
            let wide = StitchConfig { f_norm: 2.0, ..cfg };
            assert_eq!(wide.n_loc(), (n as f64 / 2.0).round() as usize);
        }
        assert!(StitchConfig { f_norm: 0.5, ..StitchConfig::new(64, 40) }.validate().is_err());
    }

    #[test]
    fn stitch_takes_middle_columns() {
        let frames: Vec<Image> = (0..5).map(|k| Image::from_fn(2, 8, |_, c| [k as f64, c as f64, 0.0])).collect();
        let cfg = StitchConfig { frame_w: 8, frame_h: 2, ..StitchConfig::new(8, 2) };
        let p = stitch(&frames, &cfg).unwrap();
        assert_eq!(p.width(), 10);
        assert_eq!(p.pixel(0, 0), [0.0, 3.0, 0.0]);
        assert_eq!(p.pixel(1, 9), [4.0, 4.0, 0.0]);
        let cfg1 = StitchConfig { n_step: 1, ..cfg.clone() };
        assert_eq!(cfg1.strip_start(), 3);
        assert_eq!(stitch(&frames, &cfg1).unwrap().width(), 5);
        assert!(stitch(&[], &cfg).is_err());
    }

    #[test]
    fn rig_focus_depth() {
        let cfg = StitchConfig::new(64, 10);
        assert_eq!(cfg.focus_depth(4.0), 8.0);
        let cam = cfg.rig(4.0).unwrap();
        assert_eq!(cam.position, [8.0, 0.0, 1.0]);
        assert_eq!(cam.right, [1.0, 0.0, 0.0]);
        let rows = StitchConfig { axis: Axis::Rows, ..cfg };
        assert_eq!(rows.rig(4.0).unwrap().right, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn panorama_diff_aligns_columns() {
        let a = Image::from_fn(2, 6, |_, c| [c as f64; 3]);
        let b = Image::from_fn(2, 9, |_, c| [c as f64 - 2.0; 3]);
        assert_eq!(panorama_diff(&a, &b, 2).unwrap(), 0.0);
        assert_eq!(panorama_diff(&a, &b, 0).unwrap(), 2.0);
    }
}
