//! Learnable weights, seeded initialization and the `BERFW001` weight file.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::GeneratorConfig;
use crate::container;
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"BERFW001";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Every weight of the generator, keyed by name in creation order.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub config: GeneratorConfig,
    pub init_seed: u64,
    tensors: IndexMap<String, Tensor>,
}

/// How a tensor is initialized.
#[derive(Clone, Copy)]
enum Init {
    /// N(0, 1) / sqrt(fan_in).
    FanIn(usize),
    Const(f32),
}

/// Names and shapes of every tensor for `cfg`, in file order.
fn layout(cfg: &GeneratorConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut out = Vec::new();
    let conv = |out: &mut Vec<_>, name: &str, o: usize, i: usize, k: usize| {
        out.push((format!("{name}.weight"), vec![o, i, k, k], Init::FanIn(i * k * k)));
        out.push((format!("{name}.bias"), vec![o], Init::Const(0.0)));
    };
    let f = cfg.bev_feat_channels;
    conv(&mut out, "bev_enc.0", f, cfg.bev_channels, 3);
    conv(&mut out, "bev_enc.1", f, f, 3);
    let c = cfg.block_channels;
    let blocks = (0..cfg.n_levels)
        .map(|i| (format!("enc.{i}"), cfg.encoder_in_channels(i)))
        .chain((0..cfg.n_levels).map(|i| (format!("dec.{i}"), cfg.decoder_in_channels(i))));
    for (prefix, cin) in blocks {
        conv(&mut out, &format!("{prefix}.sel.gamma"), cin, f, cfg.sel_kernel);
        conv(&mut out, &format!("{prefix}.sel.beta"), cin, f, cfg.sel_kernel);
        for (j, (ci, co)) in [(cin, c), (c, c)].into_iter().enumerate() {
            let name = format!("{prefix}.conv{j}");
            out.push((format!("{name}.affine.weight"), vec![ci, cfg.latent_dim], Init::FanIn(cfg.latent_dim)));
            out.push((format!("{name}.affine.bias"), vec![ci], Init::Const(1.0)));
            conv(&mut out, &name, co, ci, cfg.modconv_kernel);
        }
    }
    conv(&mut out, "to_plane", cfg.out_channels, c, 1);
    let mut width = cfg.lifted_dim();
    for i in 0..cfg.mlp_layers {
        out.push((format!("mlp.{i}.weight"), vec![cfg.mlp_hidden, width], Init::FanIn(width)));
        out.push((format!("mlp.{i}.bias"), vec![cfg.mlp_hidden], Init::Const(0.0)));
        width = cfg.mlp_hidden;
    }
    out.push(("mlp.sigma.weight".into(), vec![1, width], Init::FanIn(width)));
    out.push(("mlp.sigma.bias".into(), vec![1], Init::Const(0.0)));
    let color_in = width + if cfg.use_direction { 3 } else { 0 };
    out.push(("mlp.color.weight".into(), vec![3, color_in], Init::FanIn(color_in)));
    out.push(("mlp.color.bias".into(), vec![3], Init::Const(0.0)));
    out
}

/// Fan-in scaled Gaussian weights, zero biases, unit style-affine biases.
/// Deterministic in `(cfg, seed)`.
pub fn init_params(cfg: &GeneratorConfig, seed: u64) -> Result<GeneratorParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = layout(cfg)
        .into_iter()
        .map(|(name, shape, init)| {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::FanIn(fan_in) => {
                    let gain = 1.0 / (fan_in as f64).sqrt();
                    (0..n)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (z * gain) as f32
                        })
                        .collect()
                }
                Init::Const(v) => vec![v; n],
            };
            (name, Tensor { shape, data })
        })
        .collect();
    Ok(GeneratorParams { config: cfg.clone(), init_seed: seed, tensors })
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Element offset into the payload.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: GeneratorConfig,
    init_seed: u64,
    tensors: Vec<TensorEntry>,
}

impl GeneratorParams {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_weights(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let entries = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry { name: name.clone(), shape: t.shape.clone(), offset };
                offset += t.data.len();
                e
            })
            .collect();
        let manifest = Manifest { config: self.config.clone(), init_seed: self.init_seed, tensors: entries };
        let payload = container::f32_payload(self.tensors.values().flat_map(|t| t.data.iter().copied()));
        container::encode(WEIGHTS_MAGIC, &manifest, &payload)
    }

    /// Parses a weight file; the tensor list must match the layout implied by its config exactly.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (manifest, payload): (Manifest, _) = container::decode(WEIGHTS_MAGIC, bytes)?;
        manifest.config.validate()?;
        let expected = layout(&manifest.config);
        if expected.len() != manifest.tensors.len() {
            return Err(Error::Format(format!(
                "{} tensors listed, config implies {}",
                manifest.tensors.len(),
                expected.len()
            )));
        }
        let mut total = 0usize;
        for ((name, shape, _), entry) in expected.iter().zip(&manifest.tensors) {
            if *name != entry.name || *shape != entry.shape || entry.offset != total {
                return Err(Error::Format(format!("tensor {} does not match the config layout", entry.name)));
            }
            total = total
                .checked_add(container::checked_volume(shape)?)
                .ok_or_else(|| Error::Format("tensor sizes overflow".into()))?;
        }
        let values = container::read_f32s(payload, total)?;
        let mut tensors = IndexMap::with_capacity(expected.len());
        for entry in manifest.tensors {
            let n: usize = entry.shape.iter().product();
            let data = values[entry.offset..entry.offset + n].to_vec();
            tensors.insert(entry.name, Tensor { shape: entry.shape, data });
        }
        Ok(Self { config: manifest.config, init_seed: manifest.init_seed, tensors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = GeneratorConfig::tiny();
        let a = init_params(&cfg, 3).unwrap();
        assert_eq!(a, init_params(&cfg, 3).unwrap());
        assert_eq!(a.to_bytes().unwrap(), init_params(&cfg, 3).unwrap().to_bytes().unwrap());
        let b = init_params(&cfg, 4).unwrap();
        assert!(a.tensors().zip(b.tensors()).any(|((_, x), (_, y))| x.data != y.data));
    }

    #[test]
    fn weight_file_round_trip() {
        let p = init_params(&GeneratorConfig::tiny(), 9).unwrap();
        let bytes = p.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"BERFW001");
        let back = GeneratorParams::from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_payload_mismatch() {
        let p = init_params(&GeneratorConfig::tiny(), 9).unwrap();
        let bytes = p.to_bytes().unwrap();
        assert!(GeneratorParams::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 4]);
        assert!(GeneratorParams::from_bytes(&extra).is_err());
    }

    #[test]
    fn style_affines_start_at_identity_bias() {
        let p = init_params(&GeneratorConfig::tiny(), 0).unwrap();
        assert!(p.get("enc.0.conv0.affine.bias").unwrap().data.iter().all(|&v| v == 1.0));
        assert_eq!(p.get("to_plane.weight").unwrap().shape, vec![4, 8, 1, 1]);
    }
}
