//! Request work that runs off the async executor.

use std::time::Instant;

use bevscene_core::bevmap::{BevMap, WindowSpec};
use bevscene_core::generator::LatentCode;
use bevscene_core::metrics::{eqt, EqtConfig, EqtReport};
use bevscene_core::pipeline::{
    front_camera, neural_factory, neural_image_gen, procedural_factory, procedural_image_gen, top_down_camera, FieldMode,
};
use bevscene_core::renderer::{render, Camera, Image, ProceduralField, RenderSettings};
use bevscene_core::stitcher::{stitch, traverse, FieldFactory, StitchConfig, StitchReport};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::state::Snapshot;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// The session camera.
    #[default]
    Session,
    Top,
    /// Oblique pinhole view from the map's lower edge.
    Front,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderQuery {
    pub w: Option<usize>,
    pub h: Option<usize>,
    pub ssaa: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub view: View,
}

#[derive(Clone, Debug, Serialize)]
pub struct RenderMeta {
    pub version: u64,
    pub width: usize,
    pub height: usize,
    pub n_samples: usize,
    pub ssaa: usize,
    pub latent_seed: u64,
    pub render_ms: f64,
    pub high_frequency_energy: f64,
}

pub const MAX_PIXELS: usize = 1 << 20;

fn camera_for(snap: &Snapshot, view: View) -> ApiResult<Camera> {
    let b = &snap.bev;
    let scale = b.transform().scale;
    let sh = snap.record.gen_config.scene_height;
    Ok(match view {
        View::Session => snap.record.camera,
        View::Top => top_down_camera(b.height(), b.width(), scale, sh)?,
        View::Front => front_camera(b.height(), b.width(), scale, sh)?,
    })
}

pub fn render_image(snap: &Snapshot, q: &RenderQuery) -> ApiResult<(Image, RenderMeta)> {
    let w = q.w.unwrap_or(128);
    let h = q.h.unwrap_or(w);
    let ssaa = q.ssaa.unwrap_or(1);
    let n = q.samples.unwrap_or(32);
    if w == 0 || h == 0 || ssaa == 0 || n == 0 || w * h * ssaa * ssaa > MAX_PIXELS || n > 1024 {
        return Err(ApiError::BadRequest(format!(
            "need positive sizes with w*h*ssaa^2 <= {MAX_PIXELS} and samples <= 1024"
        )));
    }
    let seed = q.seed.unwrap_or(snap.record.latent_seed);
    let cam = camera_for(snap, q.view)?;
    let settings = RenderSettings::new(w, h, n).with_ssaa(ssaa);
    let t = Instant::now();
    let img = match (&snap.generator, snap.record.mode) {
        (Some(gen), FieldMode::Neural) => {
            let s = LatentCode::sample(seed, gen.config().latent_dim);
            render(&gen.field(&snap.bev, &s, &WindowSpec::full(&snap.bev))?, &cam, &settings)?
        }
        _ => render(&ProceduralField::from_bev_local(&snap.bev, snap.record.procedural.clone()), &cam, &settings)?,
    };
    let meta = RenderMeta {
        version: snap.record.version,
        width: w,
        height: h,
        n_samples: n,
        ssaa,
        latent_seed: seed,
        render_ms: t.elapsed().as_secs_f64() * 1e3,
        high_frequency_energy: img.high_frequency_energy(),
    };
    Ok((img, meta))
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StitchRequest {
    pub n_step: Option<usize>,
    /// Square window side; defaults to the generator input size in neural
    /// mode and to the map height otherwise.
    pub window: Option<usize>,
    pub frame_w: Option<usize>,
    pub frame_h: Option<usize>,
    pub f_norm: Option<f64>,
    pub n_samples: Option<usize>,
    pub ssaa: Option<usize>,
    pub latent_seed: Option<u64>,
}

impl StitchRequest {
    pub fn config(&self, snap: &Snapshot) -> ApiResult<StitchConfig> {
        let default_window = match snap.record.mode {
            FieldMode::Neural => snap.record.gen_config.input_res,
            FieldMode::Procedural => snap.bev.height(),
        };
        let mut cfg = StitchConfig::new(self.window.unwrap_or(default_window), self.n_step.unwrap_or(8));
        cfg.frame_w = self.frame_w.unwrap_or(cfg.frame_w);
        cfg.frame_h = self.frame_h.unwrap_or(cfg.frame_h);
        cfg.f_norm = self.f_norm.unwrap_or(cfg.f_norm);
        cfg.n_samples = self.n_samples.unwrap_or(cfg.n_samples);
        cfg.ssaa = self.ssaa.unwrap_or(cfg.ssaa);
        cfg.validate()?;
        if cfg.frame_w * cfg.frame_h * cfg.ssaa * cfg.ssaa > MAX_PIXELS {
            return Err(ApiError::BadRequest("frame too large".into()));
        }
        Ok(cfg)
    }
}

pub fn run_stitch(
    snap: &Snapshot,
    cfg: &StitchConfig,
    latent_seed: u64,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> ApiResult<(Image, StitchReport)> {
    let factory: Box<FieldFactory<'static>> = match &snap.generator {
        Some(gen) => neural_factory(gen.clone(), LatentCode::sample(latent_seed, gen.config().latent_dim)),
        None => procedural_factory(snap.record.procedural.clone()),
    };
    let rig = cfg.rig(snap.bev.transform().scale)?;
    let frames = traverse(factory.as_ref(), &snap.bev, cfg, &rig, progress)?;
    let pano = stitch(&frames, cfg)?;
    let report = StitchReport::new(cfg, frames.len(), &pano);
    Ok((pano, report))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqtQuery {
    /// Comma-separated column shifts.
    pub shifts: Option<String>,
    pub latents: Option<usize>,
    pub samples: Option<usize>,
    pub crop: Option<usize>,
}

pub fn run_eqt(snap: &Snapshot, q: &EqtQuery) -> ApiResult<EqtReport> {
    let shifts: Vec<i64> = match &q.shifts {
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<i64>().map_err(|e| ApiError::BadRequest(format!("bad shift {t:?}: {e}"))))
            .collect::<ApiResult<_>>()?,
        None => vec![1, 2, 4],
    };
    let n_latents = q.latents.unwrap_or(2);
    if n_latents > 64 || shifts.len() > 32 {
        return Err(ApiError::BadRequest("at most 64 latents and 32 shifts".into()));
    }
    let b: &BevMap = &snap.bev;
    let cam = top_down_camera(b.height(), b.width(), b.transform().scale, snap.record.gen_config.scene_height)?;
    let settings = RenderSettings::new(b.width(), b.height(), q.samples.unwrap_or(32));
    let gen = match &snap.generator {
        Some(g) => neural_image_gen(g.clone(), cam, settings),
        None => procedural_image_gen(snap.record.procedural.clone(), cam, settings),
    };
    let mut cfg = EqtConfig::new(n_latents, snap.record.gen_config.latent_dim, shifts);
    cfg.latent_seed = snap.record.latent_seed;
    cfg.crop_border = q.crop;
    Ok(eqt(gen, b, &WindowSpec::full(b), &cfg)?)
}
