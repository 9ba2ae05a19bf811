use serde::{Deserialize, Serialize};

use crate::bevmap::{GridTransform, Shape, CLEVR_COLORS};
use crate::error::{Error, Result};
use crate::signal::{FourierConfig, PeConfig};

/// How a plane feature is combined with the embedding of height.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    /// Flattened outer product, `C * 2L` features.
    OuterProduct,
    /// Concatenation, `C + 2L` features.
    Concat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub input_res: usize,
    /// Fourier feature channels fed to the first encoder.
    pub input_channels: usize,
    /// Width of every encoder/decoder block.
    pub block_channels: usize,
    pub n_levels: usize,
    pub bottleneck_res: usize,
    pub out_channels: usize,
    pub modconv_kernel: usize,
    pub sel_kernel: usize,
    pub latent_dim: usize,
    pub bev_channels: usize,
    pub bev_feat_channels: usize,
    pub pe: PeConfig,
    pub lift_mode: LiftMode,
    pub use_lowpass: bool,
    pub use_sel: bool,
    pub skip_connections: bool,
    /// Feed the view direction to the color head.
    pub use_direction: bool,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    /// Plane features are lifted over `z` in `[0, scene_height]`.
    pub scene_height: f64,
    /// `None` picks [`FourierConfig::for_grid`] at the BEV scale.
    #[serde(default)]
    pub fourier: Option<FourierConfig>,
}

impl GeneratorConfig {
    /// CPU-tractable defaults: 64x64 input, 4 levels down to 4x4.
    pub fn desk() -> Self {
        Self {
            input_res: 64,
            input_channels: 64,
            block_channels: 64,
            n_levels: 4,
            bottleneck_res: 4,
            out_channels: 32,
            modconv_kernel: 3,
            sel_kernel: 1,
            latent_dim: 64,
            bev_channels: CLEVR_COLORS.len() + Shape::COUNT,
            bev_feat_channels: 32,
            pe: PeConfig { n_freqs: 4, base: 0.5 },
            lift_mode: LiftMode::OuterProduct,
            use_lowpass: true,
            use_sel: true,
            skip_connections: true,
            use_direction: false,
            mlp_hidden: 64,
            mlp_layers: 2,
            scene_height: 3.0,
            fourier: None,
        }
    }

    /// Full-size architecture: 256x256x256 Fourier input, 16x16 bottleneck.
    pub fn paper_scale() -> Self {
        Self {
            input_res: 256,
            input_channels: 256,
            block_channels: 256,
            bottleneck_res: 16,
            latent_dim: 512,
            ..Self::desk()
        }
    }

    /// Small network for tests and fuzz seeds.
    pub fn tiny() -> Self {
        Self {
            input_res: 16,
            input_channels: 8,
            block_channels: 8,
            n_levels: 2,
            bottleneck_res: 4,
            out_channels: 4,
            latent_dim: 8,
            bev_feat_channels: 4,
            pe: PeConfig { n_freqs: 2, base: 0.5 },
            mlp_hidden: 8,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_levels == 0 || self.n_levels > 16 {
            return bad(format!("n_levels {} out of range", self.n_levels));
        }
        if self.input_res >> self.n_levels != self.bottleneck_res || self.bottleneck_res << self.n_levels != self.input_res {
            return bad(format!(
                "input_res {} / 2^{} must equal bottleneck_res {}",
                self.input_res, self.n_levels, self.bottleneck_res
            ));
        }
        for (name, k) in [("modconv_kernel", self.modconv_kernel), ("sel_kernel", self.sel_kernel)] {
            if k % 2 == 0 {
                return bad(format!("{name} must be odd, got {k}"));
            }
        }
        let positive = [
            self.input_channels,
            self.block_channels,
            self.out_channels,
            self.latent_dim,
            self.bev_channels,
            self.bev_feat_channels,
            self.pe.n_freqs,
            self.mlp_hidden,
        ];
        if positive.contains(&0) || !self.input_channels.is_multiple_of(2) {
            return bad("channel counts must be positive and input_channels even".into());
        }
        if self.scene_height.is_nan() || self.scene_height <= 0.0 {
            return bad(format!("scene_height {} must be positive", self.scene_height));
        }
        if let Some(f) = &self.fourier {
            if f.channels() != self.input_channels {
                return bad(format!("Fourier config has {} channels, expected {}", f.channels(), self.input_channels));
            }
        }
        Ok(())
    }

    pub fn fourier_for(&self, transform: &GridTransform) -> FourierConfig {
        self.fourier
            .clone()
            .unwrap_or_else(|| FourierConfig::for_grid(self.input_channels, transform.scale))
    }

    pub fn lifted_dim(&self) -> usize {
        match self.lift_mode {
            LiftMode::OuterProduct => self.out_channels * self.pe.dim(),
            LiftMode::Concat => self.out_channels + self.pe.dim(),
        }
    }

    /// Input width of decoder block `i` (0 = deepest).
    pub(crate) fn decoder_in_channels(&self, i: usize) -> usize {
        if !self.skip_connections {
            return self.block_channels;
        }
        let skip = if i + 1 == self.n_levels { self.input_channels } else { self.block_channels };
        self.block_channels + skip
    }

    pub(crate) fn encoder_in_channels(&self, i: usize) -> usize {
        if i == 0 {
            self.input_channels
        } else {
            self.block_channels
        }
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_consistent() {
        for cfg in [GeneratorConfig::desk(), GeneratorConfig::paper_scale(), GeneratorConfig::tiny()] {
            cfg.validate().unwrap();
        }
        assert_eq!(GeneratorConfig::desk().out_channels, 32);
        let bad = GeneratorConfig { bottleneck_res: 8, ..GeneratorConfig::desk() };
        assert!(bad.validate().is_err());
    }
}
