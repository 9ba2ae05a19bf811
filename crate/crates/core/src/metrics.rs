//! PSNR and the translation-equivariance score (EQT).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bevmap::{BevMap, WindowSpec};
use crate::error::{Error, Result};
use crate::generator::LatentCode;
use crate::renderer::Image;

pub const DEFAULT_CAP_DB: f64 = 80.0;

/// Peak value of images remapped from `[0, 1]` to `[-1, 1]`.
pub const I_MAX: f64 = 2.0;

/// `10 log10(i_max^2 / MSE)` over every pixel and channel. Identical images
/// give `cap_db`.
pub fn psnr_capped(a: &Image, b: &Image, i_max: f64, cap_db: f64) -> Result<f64> {
    let mse = a.rms_diff(b)?.powi(2);
    Ok(psnr_from_mse(mse, i_max, cap_db))
}

pub fn psnr(a: &Image, b: &Image, i_max: f64) -> Result<f64> {
    psnr_capped(a, b, i_max, DEFAULT_CAP_DB)
}

pub fn psnr_from_mse(mse: f64, i_max: f64, cap_db: f64) -> f64 {
    if mse == 0.0 {
        cap_db
    } else {
        10.0 * (i_max * i_max / mse).log10()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqtConfig {
    pub n_latents: usize,
    pub latent_seed: u64,
    pub latent_dim: usize,
    /// Integer shifts along BEV columns.
    pub shifts: Vec<i64>,
    /// Image pixels per BEV pixel along the shift axis.
    pub mapping: i64,
    /// `None` uses [`default_crop_border`].
    pub crop_border: Option<usize>,
    pub cap_db: f64,
}

impl EqtConfig {
    pub fn new(n_latents: usize, latent_dim: usize, shifts: Vec<i64>) -> Self {
        Self { n_latents, latent_seed: 0, latent_dim, shifts, mapping: 1, crop_border: None, cap_db: DEFAULT_CAP_DB }
    }

    pub fn latent_seeds(&self) -> Vec<u64> {
        (0..self.n_latents as u64).map(|i| self.latent_seed.wrapping_add(i)).collect()
    }
}

/// Low-pass filter half-support plus the largest image-space shift.
pub fn default_crop_border(shifts: &[i64], mapping: i64) -> usize {
    let filter_half = 12;
    filter_half + shifts.iter().map(|s| (s * mapping).unsigned_abs() as usize).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqtSample {
    pub latent_seed: u64,
    pub shift: i64,
    pub mse: f64,
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqtReport {
    pub eqt_db: f64,
    pub capped: bool,
    pub n_latents: usize,
    pub n_shifts: usize,
    pub shift_range: [i64; 2],
    pub mapping: i64,
    pub crop_border: usize,
    pub samples: Vec<EqtSample>,
    /// EQT from each latent's shifts alone, in latent order.
    pub per_latent_db: Vec<f64>,
}

impl EqtReport {
    pub fn mse(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mse).collect()
    }

    pub fn median_latent_db(&self) -> f64 {
        median(&self.per_latent_db)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean over `samples` in the given order, as a capped dB value.
pub fn eqt_from_mse(mse: &[f64], cap_db: f64) -> (f64, bool) {
    let mean = mse.iter().sum::<f64>() / mse.len() as f64;
    let db = psnr_from_mse(mean, I_MAX, cap_db).min(cap_db);
    (db, db >= cap_db)
}

/// MSE in `[-1, 1]` units between `moved` and `base` shifted by `dx` image
/// columns, over columns `[border, w - border)` inside the overlap and rows
/// `[border, h - border)`.
pub fn shifted_mse(moved: &Image, base: &Image, dx: i64, border: usize) -> Result<f64> {
    if (moved.height(), moved.width()) != (base.height(), base.width()) {
        return Err(Error::ShapeMismatch("EQT images differ in size".into()));
    }
    let (h, w) = (base.height() as i64, base.width() as i64);
    let b = border as i64;
    let c0 = b.max(dx);
    let c1 = (w - b).min(w + dx);
    let (r0, r1) = (b, h - b);
    if c0 >= c1 || r0 >= r1 {
        return Err(Error::InvalidArgument(format!(
            "no valid region: {h}x{w} image, shift {dx}, crop border {border}"
        )));
    }
    let mut sum = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            let p = moved.pixel(r as usize, c as usize);
            let q = base.pixel(r as usize, (c - dx) as usize);
            // Remapping to [-1, 1] doubles every difference.
            sum += (0..3).map(|k| (2.0 * (p[k] - q[k])).powi(2)).sum::<f64>();
        }
    }
    Ok(sum / ((r1 - r0) * (c1 - c0) * 3) as f64)
}

/// `t_x[B]`: content moved `x` columns. Padded maps must keep it inside the
/// margin; tight maps lose whatever crosses the edge.
pub fn translate_input(b: &BevMap, x: i64) -> Result<BevMap> {
    if b.layout().is_tight() {
        Ok(b.translate_clipped(x, 0))
    } else {
        b.translate(x, 0)
    }
}

/// Monte Carlo EQT. `gen(B, s, window)` renders an image for a local BEV
/// placed at `window`; translating `B` by `x` columns moves the window by `-x`
/// so position-dependent inputs travel with the content.
pub fn eqt<G>(gen: G, b: &BevMap, window: &WindowSpec, cfg: &EqtConfig) -> Result<EqtReport>
where
    G: Fn(&BevMap, &LatentCode, &WindowSpec) -> Result<Image> + Sync,
{
    if cfg.n_latents == 0 || cfg.shifts.is_empty() {
        return Err(Error::InvalidArgument("EQT needs at least one latent and one shift".into()));
    }
    let moved: Vec<BevMap> = cfg.shifts.iter().map(|&x| translate_input(b, x)).collect::<Result<_>>()?;
    let border = cfg.crop_border.unwrap_or_else(|| default_crop_border(&cfg.shifts, cfg.mapping));
    let seeds = cfg.latent_seeds();
    let per_latent: Vec<Vec<EqtSample>> = seeds
        .par_iter()
        .map(|&seed| {
            let s = LatentCode::sample(seed, cfg.latent_dim);
            let base = gen(b, &s, window)?;
            cfg.shifts
                .iter()
                .zip(&moved)
                .map(|(&x, bx)| {
                    let img = gen(bx, &s, &window.offset(0, -x))?;
                    let mse = shifted_mse(&img, &base, x * cfg.mapping, border)?;
                    Ok(EqtSample { latent_seed: seed, shift: x, mse, psnr_db: psnr_from_mse(mse, I_MAX, cfg.cap_db) })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let per_latent_db = per_latent
        .iter()
        .map(|v| eqt_from_mse(&v.iter().map(|s| s.mse).collect::<Vec<_>>(), cfg.cap_db).0)
        .collect();
    let samples: Vec<EqtSample> = per_latent.into_iter().flatten().collect();
    let (eqt_db, capped) = eqt_from_mse(&samples.iter().map(|s| s.mse).collect::<Vec<_>>(), cfg.cap_db);
    Ok(EqtReport {
        eqt_db,
        capped,
        n_latents: cfg.n_latents,
        n_shifts: cfg.shifts.len(),
        shift_range: [*cfg.shifts.iter().min().unwrap(), *cfg.shifts.iter().max().unwrap()],
        mapping: cfg.mapping,
        crop_border: border,
        samples,
        per_latent_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bevmap::{rasterize, BevLayout, SceneSampler};

    fn noise(h: usize, w: usize, seed: u64) -> Image {
        Image::from_fn(h, w, |r, c| {
            let v = (((r * 131 + c * 71) as u64 ^ seed) as f64 * 0.618).fract();
            [v, 1.0 - v, 0.5 * v]
        })
    }

    /// Loop-naive PSNR in the remapped range.
    fn reference_psnr(a: &Image, b: &Image, i_max: f64) -> f64 {
        let mut sum = 0.0;
        for (x, y) in a.data().iter().zip(b.data()) {
            sum += (x - y) * (x - y);
        }
        10.0 * (i_max * i_max / (sum / a.data().len() as f64)).log10()
    }

    #[test]
    fn psnr_identities() {
        let a = noise(6, 7, 1);
        let b = noise(6, 7, 2);
        assert_eq!(psnr(&a, &a, 2.0).unwrap(), DEFAULT_CAP_DB);
        assert!((psnr(&a, &b, 2.0).unwrap() - reference_psnr(&a, &b, 2.0)).abs() < 1e-9);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        let gap = psnr(&a, &b, 2.0).unwrap() - psnr(&a, &b, 1.0).unwrap();
        assert!((gap - 20.0 * 2f64.log10()).abs() < 1e-12);
        let zeros = Image::new(3, 3);
        let twos = Image::from_fn(3, 3, |_, _| [2.0; 3]);
        assert!(psnr(&zeros, &twos, 2.0).unwrap().abs() < 1e-12);
        assert!(psnr(&zeros, &Image::new(3, 4), 2.0).is_err());
    }

    fn padded_bev() -> BevMap {
        let layout = BevLayout::clevr(32, 32, 8);
        rasterize(&SceneSampler::with_count(2, 3).sample(3, &layout).unwrap(), &layout).unwrap()
    }

    #[test]
    fn constant_generator_is_capped() {
        let b = padded_bev();
        let w = WindowSpec::new(0, 0, 32, 32);
        let cfg = EqtConfig { crop_border: Some(8), ..EqtConfig::new(2, 4, vec![1, 3]) };
        let r = eqt(|_, _, _| Ok(Image::from_fn(32, 32, |_, _| [0.3; 3])), &b, &w, &cfg).unwrap();
        assert!(r.capped && r.eqt_db == DEFAULT_CAP_DB);
        assert_eq!(r.samples.len(), 4);
    }

    #[test]
    fn bev_painter_is_exactly_equivariant() {
        // Renders the occupancy of the BEV itself: moves exactly with the content.
        let paint = |b: &BevMap, _: &LatentCode, _: &WindowSpec| -> Result<Image> {
            Ok(Image::from_fn(b.height(), b.width(), |r, c| [b.pixel(r, c).iter().sum::<f32>() as f64; 3]))
        };
        let b = padded_bev();
        let cfg = EqtConfig { crop_border: Some(8), ..EqtConfig::new(1, 4, vec![-8, -3, 0, 5, 8]) };
        let r = eqt(paint, &b, &WindowSpec::new(0, 0, 32, 32), &cfg).unwrap();
        assert!(r.capped, "{:?}", r.samples);
        assert!(eqt(paint, &b, &WindowSpec::new(0, 0, 32, 32), &EqtConfig::new(1, 4, vec![9])).is_err());
    }

    #[test]
    fn global_position_output_is_equivariant() {
        // A function of global column, like Fourier features of the window.
        let gen = |_: &BevMap, _: &LatentCode, w: &WindowSpec| -> Result<Image> {
            let o = w.origin[1].rem_euclid(5) as usize;
            Ok(Image::from_fn(32, 32, |r, c| [((r + c + o) % 5) as f64 / 4.0; 3]))
        };
        let cfg = EqtConfig { crop_border: Some(6), ..EqtConfig::new(2, 2, vec![2, -3]) };
        assert!(eqt(gen, &padded_bev(), &WindowSpec::new(0, 0, 32, 32), &cfg).unwrap().capped);
    }

    #[test]
    fn fixed_pattern_output_is_penalized() {
        let gen = |_: &BevMap, _: &LatentCode, _: &WindowSpec| -> Result<Image> {
            Ok(Image::from_fn(32, 32, |r, c| [((r + c) % 5) as f64 / 4.0; 3]))
        };
        let cfg = EqtConfig { crop_border: Some(6), ..EqtConfig::new(2, 2, vec![2]) };
        let r = eqt(gen, &padded_bev(), &WindowSpec::new(0, 0, 32, 32), &cfg).unwrap();
        assert!(!r.capped && r.eqt_db < 20.0, "{}", r.eqt_db);
    }

    #[test]
    fn sample_order_does_not_matter() {
        let a = [0.1, 0.02, 0.3, 0.004];
        let b = [0.004, 0.3, 0.1, 0.02];
        assert!((eqt_from_mse(&a, 80.0).0 - eqt_from_mse(&b, 80.0).0).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn region_excludes_border_and_vacated_columns() {
        let base = noise(16, 16, 4);
        let moved = base.shifted(3, 0);
        assert_eq!(shifted_mse(&moved, &base, 3, 0).unwrap(), 0.0);
        assert!(shifted_mse(&moved, &base, 3, 8).is_err());
        assert!(shifted_mse(&moved, &base, 2, 2).unwrap() > 0.0);
    }
}
