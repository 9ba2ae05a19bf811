use std::sync::Arc;

use super::layers::leaky_relu;
use super::params::GeneratorParams;
use super::{GeneratorConfig, LiftMode};
use crate::error::{Error, Result};
use crate::signal::{bilinear_sample_into, pe_into, FeatureGrid, PeConfig};

/// Density and color at a point. `d` is a unit view direction.
pub trait RadianceField: Sync {
    fn query(&self, p: [f64; 3], d: [f64; 3]) -> (f64, [f64; 3]);

    /// Queries every point of one ray. Implementations may share work between
    /// points with the same `(x, y)`.
    fn query_ray(&self, points: &[[f64; 3]], d: [f64; 3], out: &mut Vec<(f64, [f64; 3])>) {
        out.clear();
        out.extend(points.iter().map(|&p| self.query(p, d)));
    }
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

struct Dense {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `[out][in]`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Dense {
    fn load(params: &GeneratorParams, name: &str) -> Result<Self> {
        let w = params.get(&format!("{name}.weight"))?;
        let [out_dim, in_dim] = w.shape[..] else {
            return Err(Error::ShapeMismatch(format!("{name}.weight has shape {:?}", w.shape)));
        };
        Ok(Self { in_dim, out_dim, w: w.to_f64(), b: params.get(&format!("{name}.bias"))?.to_f64() })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().enumerate() {
            *v = self.b[o] + self.w[o * self.in_dim..][..self.in_dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// The per-point decoder shared by every field built from one set of weights.
pub struct Mlp {
    hidden: Vec<Dense>,
    sigma: Dense,
    color: Dense,
}

impl Mlp {
    pub fn load(params: &GeneratorParams) -> Result<Self> {
        let cfg = &params.config;
        let hidden = (0..cfg.mlp_layers).map(|i| Dense::load(params, &format!("mlp.{i}"))).collect::<Result<Vec<_>>>()?;
        if hidden.first().is_some_and(|d| d.in_dim != cfg.lifted_dim()) {
            return Err(Error::ShapeMismatch("first MLP layer does not match the lifted width".into()));
        }
        Ok(Self { hidden, sigma: Dense::load(params, "mlp.sigma")?, color: Dense::load(params, "mlp.color")? })
    }
}

/// `F(x, y, z) = Θ(P(x, y) ⊗ PE(z))`: a feature plane lifted into a volume.
pub struct NeuralField {
    plane: FeatureGrid,
    mlp: Arc<Mlp>,
    pe: PeConfig,
    lift: LiftMode,
    scene_height: f64,
    use_direction: bool,
}

/// Per-ray scratch space.
struct Scratch {
    feat: Vec<f64>,
    pe: Vec<f64>,
    /// First-layer partial sums that depend only on `(x, y)`.
    partial: Vec<f64>,
    h: Vec<f64>,
    h2: Vec<f64>,
    color_in: Vec<f64>,
}

impl NeuralField {
    pub fn new(plane: FeatureGrid, mlp: Arc<Mlp>, cfg: &GeneratorConfig) -> Result<Self> {
        if plane.channels() != cfg.out_channels {
            return Err(Error::ShapeMismatch(format!(
                "plane has {} channels, expected {}",
                plane.channels(),
                cfg.out_channels
            )));
        }
        Ok(Self {
            plane,
            mlp,
            pe: cfg.pe,
            lift: cfg.lift_mode,
            scene_height: cfg.scene_height,
            use_direction: cfg.use_direction,
        })
    }

    pub fn plane(&self) -> &FeatureGrid {
        &self.plane
    }

    /// The lifted feature vector, built explicitly.
    pub fn lift(&self, p: [f64; 3]) -> Vec<f64> {
        let f = crate::signal::bilinear_sample(&self.plane, p[0], p[1]);
        let e = crate::signal::pe(p[2], &self.pe);
        match self.lift {
            LiftMode::OuterProduct => f.iter().flat_map(|a| e.iter().map(move |b| a * b)).collect(),
            LiftMode::Concat => f.into_iter().chain(e).collect(),
        }
    }

    fn scratch(&self) -> Scratch {
        let width = self.mlp.hidden.first().map_or(0, |d| d.out_dim);
        let last = self.mlp.hidden.last().map_or(self.plane.channels(), |d| d.out_dim);
        Scratch {
            feat: vec![0.0; self.plane.channels()],
            pe: vec![0.0; self.pe.dim()],
            partial: vec![0.0; width * self.pe.dim().max(1)],
            h: vec![0.0; last.max(width)],
            h2: vec![0.0; last.max(width)],
            color_in: Vec::with_capacity(last + 3),
        }
    }

    /// Fills `s.partial` from the plane feature at `(x, y)`.
    fn prepare_column(&self, x: f64, y: f64, s: &mut Scratch) {
        bilinear_sample_into(&self.plane, x, y, &mut s.feat);
        let Some(first) = self.mlp.hidden.first() else { return };
        let p = self.pe.dim();
        let c = s.feat.len();
        match self.lift {
            // partial[k][o] = sum_c W[o][c*P + k] f_c
            LiftMode::OuterProduct => {
                for o in 0..first.out_dim {
                    let row = &first.w[o * first.in_dim..][..first.in_dim];
                    for k in 0..p {
                        s.partial[k * first.out_dim + o] = (0..c).map(|ch| row[ch * p + k] * s.feat[ch]).sum();
                    }
                }
            }
            LiftMode::Concat => {
                for o in 0..first.out_dim {
                    let row = &first.w[o * first.in_dim..][..c];
                    s.partial[o] = row.iter().zip(&s.feat).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    fn eval_point(&self, z: f64, d: [f64; 3], s: &mut Scratch) -> (f64, [f64; 3]) {
        if !(0.0..=self.scene_height).contains(&z) {
            return (0.0, [0.0; 3]);
        }
        let mlp = &*self.mlp;
        let mut width = s.feat.len();
        if let Some(first) = mlp.hidden.first() {
            pe_into(z, &self.pe, &mut s.pe);
            let p = self.pe.dim();
            let n = first.out_dim;
            for o in 0..n {
                let v = match self.lift {
                    LiftMode::OuterProduct => (0..p).map(|k| s.partial[k * n + o] * s.pe[k]).sum::<f64>(),
                    LiftMode::Concat => {
                        let tail = &first.w[o * first.in_dim + s.feat.len()..][..p];
                        s.partial[o] + tail.iter().zip(&s.pe).map(|(a, b)| a * b).sum::<f64>()
                    }
                };
                s.h[o] = leaky_relu(first.b[o] + v);
            }
            width = n;
            for layer in &mlp.hidden[1..] {
                layer.apply(&s.h[..layer.in_dim], &mut s.h2[..layer.out_dim]);
                for (dst, v) in s.h.iter_mut().zip(&s.h2[..layer.out_dim]) {
                    *dst = leaky_relu(*v);
                }
                width = layer.out_dim;
            }
        } else {
            s.h[..width].copy_from_slice(&s.feat);
        }
        let mut sig = [0.0];
        mlp.sigma.apply(&s.h[..width], &mut sig);
        s.color_in.clear();
        s.color_in.extend_from_slice(&s.h[..width]);
        if self.use_direction {
            s.color_in.extend_from_slice(&d);
        }
        let mut rgb = [0.0; 3];
        mlp.color.apply(&s.color_in, &mut rgb);
        (softplus(sig[0]), rgb.map(sigmoid))
    }
}

impl RadianceField for NeuralField {
    fn query(&self, p: [f64; 3], d: [f64; 3]) -> (f64, [f64; 3]) {
        let mut s = self.scratch();
        self.prepare_column(p[0], p[1], &mut s);
        self.eval_point(p[2], d, &mut s)
    }

    fn query_ray(&self, points: &[[f64; 3]], d: [f64; 3], out: &mut Vec<(f64, [f64; 3])>) {
        out.clear();
        let mut s = self.scratch();
        let mut column: Option<(u64, u64)> = None;
        for p in points {
            let key = (p[0].to_bits(), p[1].to_bits());
            if column != Some(key) {
                self.prepare_column(p[0], p[1], &mut s);
                column = Some(key);
            }
            out.push(self.eval_point(p[2], d, &mut s));
        }
    }
}
