//! Feature-plane generator and the neural radiance field it drives.

mod config;
mod field;
pub mod layers;
mod params;
mod unet;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use config::{GeneratorConfig, LiftMode};
pub use field::{Mlp, NeuralField, RadianceField};
pub use params::{init_params, GeneratorParams, Tensor, WEIGHTS_MAGIC};
pub use unet::unet_forward;

use crate::bevmap::{BevMap, GridTransform, WindowSpec};
use crate::error::Result;
use crate::signal::FeatureGrid;

/// Style code `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(Vec<f64>);

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Standard normal entries, deterministic in `seed`.
    pub fn sample(seed: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Weights unpacked once, for repeated evaluation.
pub struct Generator {
    params: GeneratorParams,
    unet: unet::Unet,
    mlp: Arc<Mlp>,
}

impl Generator {
    pub fn new(params: GeneratorParams) -> Result<Self> {
        params.config.validate()?;
        Ok(Self { unet: unet::Unet::load(&params)?, mlp: Arc::new(Mlp::load(&params)?), params })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.params.config
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    /// See [`unet_forward`].
    pub fn plane(&self, b: &BevMap, s: &LatentCode, window: &WindowSpec) -> Result<FeatureGrid> {
        self.unet.forward(&self.params.config, b, s, window)
    }

    /// Radiance field for one window. The plane is re-anchored so the field
    /// lives in the window-local frame: world `(0, 0)` is the window's corner.
    pub fn field(&self, b: &BevMap, s: &LatentCode, window: &WindowSpec) -> Result<NeuralField> {
        let plane = self.plane(b, s, window)?;
        let local = GridTransform::new(plane.transform().scale, [0.0, 0.0]);
        NeuralField::new(plane.with_transform(local), self.mlp.clone(), &self.params.config)
    }
}

/// One-shot version of [`Generator::field`].
pub fn lift_and_query(params: &GeneratorParams, b: &BevMap, s: &LatentCode, window: &WindowSpec) -> Result<NeuralField> {
    Generator::new(params.clone())?.field(b, s, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bevmap::{rasterize, BevLayout, SceneSampler};

    fn tiny_bev(seed: u64) -> BevMap {
        let layout = BevLayout::clevr(16, 16, 2);
        let objects = SceneSampler::with_count(1, 2).sample(seed, &layout).unwrap();
        rasterize(&objects, &layout).unwrap()
    }

    #[test]
    fn plane_has_configured_shape_and_is_deterministic() {
        let cfg = GeneratorConfig::tiny();
        let g = Generator::new(init_params(&cfg, 2).unwrap()).unwrap();
        let b = tiny_bev(1);
        let s = LatentCode::sample(0, cfg.latent_dim);
        let w = WindowSpec::new(0, 0, 16, 16);
        let p = g.plane(&b, &s, &w).unwrap();
        assert_eq!(p.dims(), (16, 16, cfg.out_channels));
        assert_eq!(p.transform(), b.transform());
        assert!(p.data().iter().all(|v| v.is_finite()));
        assert_eq!(p, unet_forward(g.params(), &b, &s, &w).unwrap());
    }

    #[test]
    fn plane_depends_on_every_input() {
        let cfg = GeneratorConfig::tiny();
        let g = Generator::new(init_params(&cfg, 2).unwrap()).unwrap();
        let b = tiny_bev(1);
        let s = LatentCode::sample(0, cfg.latent_dim);
        let w = WindowSpec::new(0, 0, 16, 16);
        let base = g.plane(&b, &s, &w).unwrap();
        assert_ne!(base, g.plane(&tiny_bev(7), &s, &w).unwrap());
        assert_ne!(base, g.plane(&b, &LatentCode::sample(1, cfg.latent_dim), &w).unwrap());
        assert_ne!(base, g.plane(&b, &s, &w.offset(0, 4)).unwrap());
    }

    #[test]
    fn ablation_switches_change_the_network() {
        let b = tiny_bev(3);
        let w = WindowSpec::new(0, 0, 16, 16);
        let run = |cfg: GeneratorConfig| {
            let s = LatentCode::sample(0, cfg.latent_dim);
            Generator::new(init_params(&cfg, 2).unwrap()).unwrap().plane(&b, &s, &w).unwrap()
        };
        let base = run(GeneratorConfig::tiny());
        assert_ne!(base, run(GeneratorConfig { use_lowpass: false, ..GeneratorConfig::tiny() }));
        assert_ne!(base, run(GeneratorConfig { use_sel: false, ..GeneratorConfig::tiny() }));
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let cfg = GeneratorConfig::tiny();
        let g = Generator::new(init_params(&cfg, 2).unwrap()).unwrap();
        let s = LatentCode::sample(0, cfg.latent_dim);
        let big = rasterize(&[], &BevLayout::clevr(32, 32, 2)).unwrap();
        assert!(g.plane(&big, &s, &WindowSpec::new(0, 0, 32, 32)).is_err());
        assert!(g.plane(&tiny_bev(1), &LatentCode::sample(0, 3), &WindowSpec::new(0, 0, 16, 16)).is_err());
    }

    #[test]
    fn latent_sampling_is_seeded() {
        assert_eq!(LatentCode::sample(4, 16), LatentCode::sample(4, 16));
        assert_ne!(LatentCode::sample(4, 16), LatentCode::sample(5, 16));
    }
}
