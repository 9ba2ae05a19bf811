//! Convolution layers over [`FeatureGrid`]s. Weights arrive as `[out, in, k, k]`
//! tensors and are repacked to `[ky][kx][in][out]` so the inner loop runs over
//! output channels.

use super::params::{GeneratorParams, Tensor};
use crate::error::{Error, Result};
use crate::signal::FeatureGrid;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DEMOD_EPS: f64 = 1e-8;
pub const NORM_EPS: f64 = 1e-5;

#[inline]
pub fn leaky_relu(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

/// A plain convolution with repacked weights.
#[derive(Clone, Debug)]
pub struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    /// `[ky][kx][in][out]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

fn conv_shape(t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape[..] {
        [o, i, k, k2] if k == k2 && k % 2 == 1 => Ok((o, i, k)),
        _ => Err(Error::ShapeMismatch(format!("bad conv weight shape {:?}", t.shape))),
    }
}

fn repack(w: &[f64], o: usize, i: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for oc in 0..o {
        for ic in 0..i {
            for ky in 0..k {
                for kx in 0..k {
                    out[((ky * k + kx) * i + ic) * o + oc] = w[((oc * i + ic) * k + ky) * k + kx];
                }
            }
        }
    }
    out
}

impl Conv {
    pub fn load(params: &GeneratorParams, name: &str) -> Result<Self> {
        let w = params.get(&format!("{name}.weight"))?;
        let (out_c, in_c, k) = conv_shape(w)?;
        let bias = params.get(&format!("{name}.bias"))?.to_f64();
        Ok(Self { in_c, out_c, k, weight: repack(&w.to_f64(), out_c, in_c, k), bias })
    }

    pub fn forward(&self, x: &FeatureGrid) -> Result<FeatureGrid> {
        conv2d(x, &self.weight, &self.bias, self.in_c, self.out_c, self.k)
    }
}

/// Same-size convolution with zero padding. `weight` is `[ky][kx][in][out]`.
pub fn conv2d(x: &FeatureGrid, weight: &[f64], bias: &[f64], in_c: usize, out_c: usize, k: usize) -> Result<FeatureGrid> {
    let (h, w, c) = x.dims();
    if c != in_c || weight.len() != k * k * in_c * out_c || bias.len() != out_c {
        return Err(Error::ShapeMismatch(format!(
            "conv expects {in_c} input channels (k={k}, out={out_c}), got {c}"
        )));
    }
    let half = (k / 2) as isize;
    let src = x.data();
    let mut out = vec![0.0; h * w * out_c];
    for r in 0..h {
        for col in 0..w {
            let acc = &mut out[(r * w + col) * out_c..][..out_c];
            acc.copy_from_slice(bias);
            for ky in 0..k {
                let sr = r as isize + ky as isize - half;
                if sr < 0 || sr >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sc = col as isize + kx as isize - half;
                    if sc < 0 || sc >= w as isize {
                        continue;
                    }
                    let px = &src[(sr as usize * w + sc as usize) * c..][..c];
                    let taps = &weight[(ky * k + kx) * in_c * out_c..][..in_c * out_c];
                    for (ic, &v) in px.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let row = &taps[ic * out_c..][..out_c];
                        for (a, &wv) in acc.iter_mut().zip(row) {
                            *a += v * wv;
                        }
                    }
                }
            }
        }
    }
    FeatureGrid::from_vec(h, w, out_c, out, *x.transform())
}

/// Style-modulated convolution with weight demodulation, followed by a
/// leaky ReLU.
#[derive(Clone, Debug)]
pub struct ModConv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    latent_dim: usize,
    /// `[out, in, k, k]`
    weight: Vec<f64>,
    bias: Vec<f64>,
    affine_w: Vec<f64>,
    affine_b: Vec<f64>,
}

impl ModConv {
    pub fn load(params: &GeneratorParams, name: &str) -> Result<Self> {
        let w = params.get(&format!("{name}.weight"))?;
        let (out_c, in_c, k) = conv_shape(w)?;
        let aw = params.get(&format!("{name}.affine.weight"))?;
        if aw.shape.len() != 2 || aw.shape[0] != in_c {
            return Err(Error::ShapeMismatch(format!("{name}.affine.weight has shape {:?}", aw.shape)));
        }
        Ok(Self {
            in_c,
            out_c,
            k,
            latent_dim: aw.shape[1],
            weight: w.to_f64(),
            bias: params.get(&format!("{name}.bias"))?.to_f64(),
            affine_w: aw.to_f64(),
            affine_b: params.get(&format!("{name}.affine.bias"))?.to_f64(),
        })
    }

    /// Per-input-channel styles from the latent code.
    pub fn styles(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.latent_dim {
            return Err(Error::ShapeMismatch(format!(
                "latent has {} entries, expected {}",
                s.len(),
                self.latent_dim
            )));
        }
        Ok((0..self.in_c)
            .map(|i| {
                let row = &self.affine_w[i * self.latent_dim..][..self.latent_dim];
                self.affine_b[i] + row.iter().zip(s).map(|(w, z)| w * z).sum::<f64>()
            })
            .collect())
    }

    /// Modulated and demodulated weights in `[out, in, k, k]` order.
    pub fn modulated_weights(&self, s: &[f64]) -> Result<Vec<f64>> {
        let styles = self.styles(s)?;
        let kk = self.k * self.k;
        let mut w = self.weight.clone();
        for o in 0..self.out_c {
            let block = &mut w[o * self.in_c * kk..][..self.in_c * kk];
            for (i, chunk) in block.chunks_mut(kk).enumerate() {
                chunk.iter_mut().for_each(|v| *v *= styles[i]);
            }
            let d = 1.0 / (block.iter().map(|v| v * v).sum::<f64>() + DEMOD_EPS).sqrt();
            block.iter_mut().for_each(|v| *v *= d);
        }
        Ok(w)
    }

    pub fn forward(&self, x: &FeatureGrid, s: &[f64]) -> Result<FeatureGrid> {
        let w = repack(&self.modulated_weights(s)?, self.out_c, self.in_c, self.k);
        let y = conv2d(x, &w, &self.bias, self.in_c, self.out_c, self.k)?;
        Ok(y.map(leaky_relu))
    }
}

/// Per-channel normalization over all pixels.
pub fn instance_norm(x: &FeatureGrid) -> FeatureGrid {
    let (h, w, c) = x.dims();
    let n = (h * w) as f64;
    let mut mean = vec![0.0; c];
    for px in x.data().chunks(c) {
        mean.iter_mut().zip(px).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; c];
    for px in x.data().chunks(c) {
        for ((s, v), m) in var.iter_mut().zip(px).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let inv: Vec<f64> = var.iter().map(|s| 1.0 / (s / n + NORM_EPS).sqrt()).collect();
    let mut out = x.clone();
    for px in out.data_mut().chunks_mut(c) {
        for ((v, m), s) in px.iter_mut().zip(&mean).zip(&inv) {
            *v = (*v - m) * s;
        }
    }
    out
}

/// Spatially modulated normalization: `(1 + gamma) * norm(a) + beta`, with
/// `gamma` and `beta` predicted per pixel from BEV features at `a`'s resolution.
#[derive(Clone, Debug)]
pub struct Sel {
    gamma: Conv,
    beta: Conv,
}

impl Sel {
    pub fn load(params: &GeneratorParams, name: &str) -> Result<Self> {
        Ok(Self { gamma: Conv::load(params, &format!("{name}.gamma"))?, beta: Conv::load(params, &format!("{name}.beta"))? })
    }

    pub fn forward(&self, a: &FeatureGrid, bev_feat: &FeatureGrid) -> Result<FeatureGrid> {
        if (a.height(), a.width()) != (bev_feat.height(), bev_feat.width()) {
            return Err(Error::ShapeMismatch(format!(
                "SEL input is {}x{} but BEV features are {}x{}",
                a.height(),
                a.width(),
                bev_feat.height(),
                bev_feat.width()
            )));
        }
        let g = self.gamma.forward(bev_feat)?;
        let b = self.beta.forward(bev_feat)?;
        if g.channels() != a.channels() {
            return Err(Error::ShapeMismatch(format!(
                "SEL predicts {} channels for a {}-channel input",
                g.channels(),
                a.channels()
            )));
        }
        let mut out = instance_norm(a);
        for ((v, gv), bv) in out.data_mut().iter_mut().zip(g.data()).zip(b.data()) {
            *v = (1.0 + gv) * *v + bv;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bevmap::GridTransform;
    use crate::generator::{init_params, GeneratorConfig};

    fn grid(h: usize, w: usize, c: usize, seed: u64) -> FeatureGrid {
        FeatureGrid::from_fn(h, w, c, GridTransform::default(), |r, col, ch| {
            (((r * 31 + col * 17 + ch * 7) as u64 ^ seed) as f64 * 0.37).sin()
        })
    }

    /// Direct evaluation of the convolution sum on the original weight layout.
    fn naive_conv(x: &FeatureGrid, w: &[f64], b: &[f64], o: usize, k: usize) -> Vec<f64> {
        let (h, wd, c) = x.dims();
        let half = (k / 2) as i64;
        let mut out = Vec::new();
        for r in 0..h as i64 {
            for col in 0..wd as i64 {
                for oc in 0..o {
                    let mut acc = b[oc];
                    for ic in 0..c {
                        for ky in 0..k as i64 {
                            for kx in 0..k as i64 {
                                let (sr, sc) = (r + ky - half, col + kx - half);
                                if sr >= 0 && sc >= 0 && sr < h as i64 && sc < wd as i64 {
                                    acc += w[((oc * c + ic) * k + ky as usize) * k + kx as usize]
                                        * x.get(sr as usize, sc as usize, ic);
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_sum() {
        let x = grid(7, 9, 3, 1);
        let (o, i, k) = (4, 3, 3);
        let w: Vec<f64> = (0..o * i * k * k).map(|j| ((j * 13 % 29) as f64 - 14.0) / 10.0).collect();
        let b = vec![0.1, -0.2, 0.3, 0.0];
        let y = conv2d(&x, &repack(&w, o, i, k), &b, i, o, k).unwrap();
        let expect = naive_conv(&x, &w, &b, o, k);
        for (a, e) in y.data().iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn demodulated_filters_have_unit_norm() {
        let p = init_params(&GeneratorConfig::tiny(), 5).unwrap();
        let m = ModConv::load(&p, "enc.1.conv0").unwrap();
        let s: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        let w = m.modulated_weights(&s).unwrap();
        let per_out = m.in_c * m.k * m.k;
        for o in 0..m.out_c {
            let n: f64 = w[o * per_out..][..per_out].iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-6, "{n}");
        }
        assert!(m.forward(&grid(4, 4, 8, 0), &s[..3]).is_err());
    }

    #[test]
    fn instance_norm_standardizes_channels() {
        let y = instance_norm(&grid(8, 8, 3, 2));
        for ch in 0..3 {
            let vals: Vec<f64> = y.data().iter().skip(ch).step_by(3).copied().collect();
            let mean = vals.iter().sum::<f64>() / 64.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zeroed_sel_heads_reduce_to_normalization() {
        let mut p = init_params(&GeneratorConfig::tiny(), 1).unwrap();
        for name in ["enc.0.sel.gamma.weight", "enc.0.sel.beta.weight"] {
            p.get_mut(name).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
        }
        let sel = Sel::load(&p, "enc.0.sel").unwrap();
        let a = grid(8, 8, 8, 3);
        let out = sel.forward(&a, &grid(8, 8, 4, 4)).unwrap();
        assert_eq!(out, instance_norm(&a));
        assert!(sel.forward(&a, &grid(4, 4, 4, 4)).is_err());
    }
}
