use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{Ray, Vec3};

/// Samples along one ray, with the field's answers at each point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<Vec3>,
    pub deltas: Vec<f64>,
    pub colors: Vec<Vec3>,
    pub sigmas: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeOptions {
    /// Composited behind whatever opacity the ray leaves unused.
    pub background: Vec3,
    /// Run the transmittance product through the current sample, as the
    /// formula is sometimes printed. Off by default.
    pub paper_exact_compositing: bool,
}

impl Default for CompositeOptions {
    fn default() -> Self {
        Self { background: [0.0; 3], paper_exact_compositing: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Composite {
    pub color: Vec3,
    pub weights: Vec<f64>,
    pub transmittance: Vec<f64>,
}

/// Uniform bins over `[near, far]`: midpoints, or one uniform draw per bin when seeded.
/// Returns the sample distances `t_i` and bin widths.
pub fn sample_along(ray: &Ray, near: f64, far: f64, n: usize, jitter_seed: Option<u64>) -> (Vec<Vec3>, Vec<f64>) {
    let mut t = Vec::with_capacity(n);
    sample_ts(near, far, n, jitter_seed, &mut t);
    let delta = (far - near) / n as f64;
    let points = t.iter().map(|&t| point_at(ray, t)).collect();
    (points, vec![delta; n])
}

#[inline]
pub(crate) fn point_at(ray: &Ray, t: f64) -> Vec3 {
    [0, 1, 2].map(|i| ray.origin[i] + t * ray.direction[i])
}

pub(crate) fn sample_ts(near: f64, far: f64, n: usize, jitter_seed: Option<u64>, out: &mut Vec<f64>) {
    out.clear();
    let delta = (far - near) / n as f64;
    let mut rng = jitter_seed.map(ChaCha8Rng::seed_from_u64);
    for i in 0..n {
        let u: f64 = rng.as_mut().map_or(0.5, |r| r.random());
        out.push(near + (i as f64 + u) * delta);
    }
}

/// `C = Σ T_i (1 - exp(-σ_i δ_i)) c_i` with `T_i = exp(-Σ_{j<i} σ_j δ_j)`.
pub fn composite(batch: &SampleBatch) -> Composite {
    composite_with(batch, &CompositeOptions::default())
}

pub fn composite_with(batch: &SampleBatch, opts: &CompositeOptions) -> Composite {
    let n = batch.sigmas.len();
    let mut weights = Vec::with_capacity(n);
    let mut transmittance = Vec::with_capacity(n);
    let color = accumulate(&batch.sigmas, &batch.deltas, &batch.colors, opts, |w, t| {
        weights.push(w);
        transmittance.push(t);
    });
    Composite { color, weights, transmittance }
}

/// Allocation-free core of [`composite_with`]; `visit` sees each `(weight, T_i)`.
#[inline]
pub(crate) fn accumulate(
    sigmas: &[f64],
    deltas: &[f64],
    colors: &[Vec3],
    opts: &CompositeOptions,
    mut visit: impl FnMut(f64, f64),
) -> Vec3 {
    let mut depth = 0.0;
    let mut out = [0.0; 3];
    let mut total = 0.0;
    for ((&s, &d), c) in sigmas.iter().zip(deltas).zip(colors) {
        let tau = s * d;
        let t = if opts.paper_exact_compositing { (-(depth + tau)).exp() } else { (-depth).exp() };
        let w = t * -(-tau).exp_m1();
        for k in 0..3 {
            out[k] += w * c[k];
        }
        total += w;
        depth += tau;
        visit(w, t);
    }
    let rest = (1.0 - total).max(0.0);
    for k in 0..3 {
        out[k] += rest * opts.background[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Front-to-back alpha blending, one sample at a time.
    fn sequential(batch: &SampleBatch) -> Vec3 {
        let mut out = [0.0; 3];
        let mut remaining = 1.0;
        for i in 0..batch.sigmas.len() {
            let alpha = 1.0 - (-batch.sigmas[i] * batch.deltas[i]).exp();
            for k in 0..3 {
                out[k] += remaining * alpha * batch.colors[i][k];
            }
            remaining *= 1.0 - alpha;
        }
        out
    }

    fn batch(sigmas: &[f64], deltas: &[f64], colors: &[Vec3]) -> SampleBatch {
        SampleBatch { points: vec![[0.0; 3]; sigmas.len()], deltas: deltas.to_vec(), colors: colors.to_vec(), sigmas: sigmas.to_vec() }
    }

    #[test]
    fn two_sample_closed_form() {
        let b = batch(&[1.0, 2.0], &[0.5, 0.5], &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let c = composite(&b).color;
        let e = [1.0 - (-0.5f64).exp(), (-0.5f64).exp() * (1.0 - (-1.0f64).exp()), 0.0];
        for k in 0..3 {
            assert!((c[k] - e[k]).abs() < 1e-15);
        }
        assert_eq!(sequential(&b)[2], 0.0);
    }

    #[test]
    fn empty_and_opaque_extremes() {
        let clear = composite(&batch(&[0.0; 4], &[0.25; 4], &[[1.0; 3]; 4]));
        assert_eq!(clear.color, [0.0; 3]);
        assert!(clear.weights.iter().all(|&w| w == 0.0));
        let opaque = composite(&batch(&[1e9, 3.0], &[0.5, 0.5], &[[0.2, 0.4, 0.6], [1.0; 3]]));
        assert!((opaque.weights[0] - 1.0).abs() < 1e-12 && opaque.weights[1] < 1e-12);
        assert!((opaque.color[2] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn background_fills_unused_opacity() {
        let opts = CompositeOptions { background: [1.0; 3], ..Default::default() };
        let c = composite_with(&batch(&[0.0], &[1.0], &[[0.0; 3]]), &opts);
        assert_eq!(c.color, [1.0; 3]);
    }

    #[test]
    fn splitting_a_bin_changes_nothing() {
        let b = batch(&[0.7, 1.3], &[0.4, 0.6], &[[0.1, 0.2, 0.3], [0.9, 0.5, 0.1]]);
        let split = batch(&[0.7, 0.7, 1.3], &[0.2, 0.2, 0.6], &[[0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0.9, 0.5, 0.1]]);
        let (a, s) = (composite(&b).color, composite(&split).color);
        for k in 0..3 {
            assert!((a[k] - s[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn printed_formula_attenuates_the_current_sample() {
        let b = batch(&[1.0], &[1.0], &[[1.0; 3]]);
        let opts = CompositeOptions { paper_exact_compositing: true, ..Default::default() };
        let c = composite_with(&b, &opts);
        assert!((c.weights[0] - (-1.0f64).exp() * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sampling_bins() {
        let ray = Ray { origin: [0.0; 3], direction: [0.0, 0.0, 1.0] };
        let (p, d) = sample_along(&ray, 1.0, 3.0, 1, None);
        assert_eq!((p, d), (vec![[0.0, 0.0, 2.0]], vec![2.0]));
        let (p, d) = sample_along(&ray, 1.0, 3.0, 7, Some(42));
        assert!((d.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        for (i, q) in p.iter().enumerate() {
            let lo = 1.0 + i as f64 * 2.0 / 7.0;
            assert!(q[2] >= lo && q[2] <= lo + 2.0 / 7.0);
        }
        assert_eq!(sample_along(&ray, 1.0, 3.0, 7, Some(42)), sample_along(&ray, 1.0, 3.0, 7, Some(42)));
    }
}
