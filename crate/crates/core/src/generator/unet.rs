use super::layers::{leaky_relu, Conv, ModConv, Sel};
use super::params::GeneratorParams;
use super::{GeneratorConfig, LatentCode};
use crate::bevmap::{BevMap, GridTransform, WindowSpec};
use crate::error::{Error, Result};
use crate::signal::{downsample_with, fourier_grid, upsample, Boundary, FeatureGrid};

struct Block {
    sel: Sel,
    conv0: ModConv,
    conv1: ModConv,
}

impl Block {
    fn load(params: &GeneratorParams, prefix: &str) -> Result<Self> {
        Ok(Self {
            sel: Sel::load(params, &format!("{prefix}.sel"))?,
            conv0: ModConv::load(params, &format!("{prefix}.conv0"))?,
            conv1: ModConv::load(params, &format!("{prefix}.conv1"))?,
        })
    }

    fn forward(&self, cfg: &GeneratorConfig, a: &FeatureGrid, bev: &FeatureGrid, s: &[f64]) -> Result<FeatureGrid> {
        let a = if cfg.use_sel { self.sel.forward(a, bev)? } else { a.clone() };
        let a = self.conv0.forward(&a, s)?;
        self.conv1.forward(&a, s)
    }
}

/// The plane-producing U-Net with its weights unpacked for evaluation.
pub(crate) struct Unet {
    bev_enc: [Conv; 2],
    encoders: Vec<Block>,
    decoders: Vec<Block>,
    to_plane: Conv,
}

impl Unet {
    pub fn load(params: &GeneratorParams) -> Result<Self> {
        let n = params.config.n_levels;
        Ok(Self {
            bev_enc: [Conv::load(params, "bev_enc.0")?, Conv::load(params, "bev_enc.1")?],
            encoders: (0..n).map(|i| Block::load(params, &format!("enc.{i}"))).collect::<Result<_>>()?,
            decoders: (0..n).map(|i| Block::load(params, &format!("dec.{i}"))).collect::<Result<_>>()?,
            to_plane: Conv::load(params, "to_plane")?,
        })
    }

    pub fn forward(&self, cfg: &GeneratorConfig, b: &BevMap, s: &LatentCode, window: &WindowSpec) -> Result<FeatureGrid> {
        let n = cfg.input_res;
        if (b.height(), b.width()) != (n, n) || window.size != [n, n] {
            return Err(Error::ShapeMismatch(format!(
                "generator expects a {n}x{n} BEV and window, got {}x{} and {:?}",
                b.height(),
                b.width(),
                window.size
            )));
        }
        if b.channels() != cfg.bev_channels {
            return Err(Error::ShapeMismatch(format!(
                "BEV has {} channels, generator expects {}",
                b.channels(),
                cfg.bev_channels
            )));
        }
        let s = s.values();
        let down = |g: &FeatureGrid| downsample_with(g, 2, cfg.use_lowpass, Boundary::Zero);

        // BEV feature pyramid, one level per resolution.
        let mut feat = FeatureGrid::from_bev(b);
        for conv in &self.bev_enc {
            feat = conv.forward(&feat)?.map(leaky_relu);
        }
        let mut pyramid = vec![feat];
        for _ in 0..cfg.n_levels {
            let next = down(pyramid.last().unwrap())?;
            pyramid.push(next);
        }

        // Fourier features over the window's global pixel positions.
        let frame = GridTransform::new(b.transform().scale, [0.0, 0.0]);
        let gamma = fourier_grid(&cfg.fourier_for(&frame), window, &frame)?;

        let mut skips = Vec::with_capacity(cfg.n_levels);
        let mut a = gamma;
        for (i, enc) in self.encoders.iter().enumerate() {
            let x = down(&a)?;
            skips.push(a);
            a = enc.forward(cfg, &x, &pyramid[i + 1], s)?;
        }
        for (i, dec) in self.decoders.iter().enumerate() {
            let level = cfg.n_levels - 1 - i;
            let up = upsample(&a, 2)?;
            let x = if cfg.skip_connections { up.concat_channels(&skips[level])? } else { up };
            a = dec.forward(cfg, &x, &pyramid[level], s)?;
        }
        Ok(self.to_plane.forward(&a)?.with_transform(*b.transform()))
    }
}

/// Feature plane `P = U(B, s)` for a local BEV `b` whose pixel (0, 0) sits at
/// global pixel `window.origin`. The plane carries `b`'s transform.
pub fn unet_forward(params: &GeneratorParams, b: &BevMap, s: &LatentCode, window: &WindowSpec) -> Result<FeatureGrid> {
    Unet::load(params)?.forward(&params.config, b, s, window)
}
