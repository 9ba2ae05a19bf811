use super::fir::{filter_cols, filter_rows};
use super::{design_lowpass, Boundary, FeatureGrid, FirFilter, DEFAULT_BETA, DEFAULT_HALF_WIDTH};
use crate::bevmap::GridTransform;
use crate::error::{Error, Result};

/// Placement after keeping every `factor`-th sample starting at index 0.
fn coarser(t: &GridTransform, factor: usize) -> GridTransform {
    let k = factor as f64;
    GridTransform::new(t.scale / k, [(t.offset[0] - 0.5) / k + 0.5, (t.offset[1] - 0.5) / k + 0.5])
}

/// Placement after bilinear upsampling where input sample `i` lands on output sample `k * i`.
fn finer(t: &GridTransform, factor: usize) -> GridTransform {
    let k = factor as f64;
    GridTransform::new(t.scale * k, [k * (t.offset[0] - 0.5) + 0.5, k * (t.offset[1] - 0.5) + 0.5])
}

fn check_divisible(g: &FeatureGrid, factor: usize) -> Result<()> {
    if factor == 0 || !g.height().is_multiple_of(factor) || !g.width().is_multiple_of(factor) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} grid is not divisible by factor {factor}",
            g.height(),
            g.width()
        )));
    }
    Ok(())
}

/// Anti-aliased decimation: Kaiser low-pass at `0.5 / factor`, zero padding,
/// then keep every `factor`-th sample. `factor == 1` is a filter-only pass,
/// which for a half-band cutoff is the identity.
pub fn downsample(g: &FeatureGrid, factor: usize) -> Result<FeatureGrid> {
    downsample_with(g, factor, true, Boundary::Zero)
}

/// [`downsample`] with the low-pass optional and a choice of boundary.
///
/// Unlike [`filter2d`](super::filter2d), grids smaller than the filter are
/// accepted; the padding rule defines the result.
pub fn downsample_with(g: &FeatureGrid, factor: usize, lowpass: bool, boundary: Boundary) -> Result<FeatureGrid> {
    check_divisible(g, factor)?;
    if !lowpass {
        return subsample(g, factor);
    }
    let f = design_lowpass(0.5 / factor as f64, DEFAULT_HALF_WIDTH, DEFAULT_BETA)?;
    decimate(g, &f, factor, boundary)
}

pub(crate) fn decimate(g: &FeatureGrid, f: &FirFilter, factor: usize, boundary: Boundary) -> Result<FeatureGrid> {
    check_divisible(g, factor)?;
    let (h, w, c) = g.dims();
    let cols: Vec<usize> = (0..w).step_by(factor).collect();
    let rows: Vec<usize> = (0..h).step_by(factor).collect();
    let tmp = filter_rows(g, f, &cols, boundary);
    let out = filter_cols(&tmp, h, cols.len(), c, f, &rows, boundary);
    FeatureGrid::from_vec(rows.len(), cols.len(), c, out, coarser(g.transform(), factor))
}

/// Plain stride-`factor` decimation with no filtering.
pub fn subsample(g: &FeatureGrid, factor: usize) -> Result<FeatureGrid> {
    check_divisible(g, factor)?;
    let (h, w, c) = g.dims();
    let (oh, ow) = (h / factor, w / factor);
    let mut out = FeatureGrid::zeros(oh, ow, c, coarser(g.transform(), factor));
    for r in 0..oh {
        for col in 0..ow {
            out.pixel_mut(r, col).copy_from_slice(g.pixel(r * factor, col * factor));
        }
    }
    Ok(out)
}

/// Bilinear interpolation to `(h * factor, w * factor)`; input sample `i`
/// lands exactly on output sample `factor * i`, positions past the last input
/// sample clamp to it. No post-filter.
pub fn upsample(g: &FeatureGrid, factor: usize) -> Result<FeatureGrid> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(g.clone());
    }
    let (h, w, c) = g.dims();
    let (oh, ow) = (h * factor, w * factor);
    let taps = |n: usize, len: usize| {
        let i0 = n / factor;
        let frac = (n % factor) as f64 / factor as f64;
        if i0 + 1 >= len {
            (len - 1, len - 1, 0.0)
        } else {
            (i0, i0 + 1, frac)
        }
    };
    let mut out = FeatureGrid::zeros(oh, ow, c, finer(g.transform(), factor));
    for r in 0..oh {
        let (r0, r1, fr) = taps(r, h);
        for col in 0..ow {
            let (c0, c1, fc) = taps(col, w);
            let (a, b, cc, d) = (g.pixel(r0, c0), g.pixel(r0, c1), g.pixel(r1, c0), g.pixel(r1, c1));
            let px = out.pixel_mut(r, col);
            for ch in 0..c {
                let top = (1.0 - fc) * a[ch] + fc * b[ch];
                let bottom = (1.0 - fc) * cc[ch] + fc * d[ch];
                px[ch] = (1.0 - fr) * top + fr * bottom;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{bilinear_sample, filter2d};
    use std::f64::consts::PI;

    fn t() -> GridTransform {
        GridTransform::new(4.0, [1.0, -2.0])
    }

    #[allow(clippy::approx_constant)] // hash multipliers, not e
    fn band_limited(n: usize, max_freq: f64, seed: u64) -> FeatureGrid {
        // Sum of a few sinusoids below `max_freq` cycles/px.
        let comps: Vec<(f64, f64, f64)> = (0..6)
            .map(|k| {
                let a = ((seed + k) as f64 * 1.618).fract();
                let b = ((seed + 3 * k) as f64 * 2.718).fract();
                let p = ((seed + 7 * k) as f64 * 0.577).fract();
                (max_freq * a, max_freq * b, 2.0 * PI * p)
            })
            .collect();
        FeatureGrid::from_fn(n, n, 2, t(), |r, c, ch| {
            comps
                .iter()
                .map(|&(fx, fy, p)| (2.0 * PI * (fx * c as f64 + fy * r as f64) + p + ch as f64).cos())
                .sum()
        })
    }

    #[test]
    fn constant_grid_stays_constant() {
        let g = FeatureGrid::from_fn(32, 32, 3, t(), |_, _, _| 0.3);
        let d = downsample_with(&g, 2, true, Boundary::Clamp).unwrap();
        assert_eq!(d.dims(), (16, 16, 3));
        assert!(d.data().iter().all(|v| (v - 0.3).abs() < 1e-9));
        let dz = downsample(&g, 2).unwrap();
        let h = 13 / 2 + 1;
        assert!(dz.max_abs_diff_interior(&d, h) < 1e-9);
        let u = upsample(&g, 3).unwrap();
        assert!(u.data().iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn factor_one_is_identity() {
        let g = band_limited(16, 0.4, 2);
        assert_eq!(downsample(&g, 1).unwrap(), g);
        assert_eq!(upsample(&g, 1).unwrap(), g);
    }

    #[test]
    fn decimation_matches_filter_then_stride() {
        let g = band_limited(48, 0.45, 9);
        let f = design_lowpass(0.25, DEFAULT_HALF_WIDTH, DEFAULT_BETA).unwrap();
        let full = filter2d(&g, &f, Boundary::Zero).unwrap();
        let expect = subsample(&full, 2).unwrap();
        assert_eq!(downsample(&g, 2).unwrap(), expect);
    }

    #[test]
    fn rejects_non_divisible() {
        let g = FeatureGrid::zeros(10, 12, 1, t());
        assert!(downsample(&g, 4).is_err());
        assert!(subsample(&g, 3).is_err());
    }

    #[test]
    fn placement_is_preserved() {
        let g = band_limited(16, 0.2, 1);
        let d = downsample(&g, 2).unwrap();
        // Output sample i is input sample 2i, so both sit at the same world point.
        assert_eq!(d.transform().pixel_center(3, 5), g.transform().pixel_center(6, 10));
        let u = upsample(&g, 2).unwrap();
        assert_eq!(u.transform().pixel_center(6, 10), g.transform().pixel_center(3, 5));
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(u.pixel(2 * r, 2 * c), g.pixel(r, c));
                let (x, y) = g.transform().pixel_center(r, c);
                assert_eq!(bilinear_sample(&u, x, y), g.pixel(r, c));
            }
        }
    }

    #[test]
    fn downsample_commutes_with_even_shifts() {
        for seed in 0..5 {
            let g = band_limited(64, 0.2, seed);
            for k in 1..=4i64 {
                let lhs = downsample(&g.shifted(2 * k, -2 * k), 2).unwrap();
                let rhs = downsample(&g, 2).unwrap().shifted(k, -k);
                let border = (12 + 2 * k as usize) / 2 + 1;
                assert!(lhs.max_abs_diff_interior(&rhs, border) <= 1e-5);
            }
        }
    }

    #[test]
    fn band_limited_round_trip_error_is_small() {
        let g = band_limited(64, 0.05, 4);
        let back = upsample(&downsample(&g, 2).unwrap(), 2).unwrap();
        let peak = g.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = back.max_abs_diff_interior(&g, 14);
        assert!(err <= 0.05 * peak, "{err} vs peak {peak}");
    }
}
