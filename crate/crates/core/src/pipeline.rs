//! Ready-made wiring of the engine pieces: scene presets, image generators
//! for EQT, field factories for traversal, and the ablation sweep.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bevmap::{rasterize, BevLayout, BevMap, SceneSampler, WindowSpec};
use crate::error::{Error, Result};
use crate::generator::{init_params, Generator, GeneratorConfig, LatentCode, RadianceField};
use crate::metrics::{eqt, median, EqtConfig, EqtReport};
use crate::renderer::{render, Camera, Image, ProceduralConfig, Projection, ProceduralField, RenderSettings};
use crate::stitcher::FieldFactory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    Procedural,
    Neural,
}

/// 64x64 CLEVR-style map with a 12 px margin on every side.
pub fn desk_layout() -> BevLayout {
    BevLayout::clevr(64, 64, 12)
}

pub fn sample_scene(seed: u64, layout: &BevLayout, sampler: &SceneSampler) -> Result<BevMap> {
    rasterize(&sampler.sample(seed, layout)?, layout)
}

/// Orthographic camera looking straight down on an `h x w` window in its
/// local frame, one image pixel per BEV pixel.
pub fn top_down_camera(h: usize, w: usize, scale: f64, scene_height: f64) -> Result<Camera> {
    let (wx, hy) = (w as f64 / scale, h as f64 / scale);
    let top = scene_height + 0.5;
    Camera::top_down(0.5 * wx, 0.5 * hy, top, 0.5 * wx, 0.25, top + 0.25)
}

/// Oblique pinhole view of an `h x w` window from beyond its low-y edge.
pub fn front_camera(h: usize, w: usize, scale: f64, scene_height: f64) -> Result<Camera> {
    let (wx, hy) = (w as f64 / scale, h as f64 / scale);
    let span = wx.max(hy);
    Camera::look_at(
        [0.5 * wx, -0.35 * span, 0.6 * span],
        [0.5 * wx, 0.5 * hy, 0.0],
        [0.0, 0.0, 1.0],
        Projection::Pinhole { f_norm: 1.0 },
        0.05,
        3.0 * span + scene_height,
    )
}

pub type ImageGen<'a> = Box<dyn Fn(&BevMap, &LatentCode, &WindowSpec) -> Result<Image> + Sync + Send + 'a>;

/// Renders the analytic scene of the local BEV; ignores the latent and window.
pub fn procedural_image_gen(cfg: ProceduralConfig, cam: Camera, settings: RenderSettings) -> ImageGen<'static> {
    Box::new(move |b, _, _| render(&ProceduralField::from_bev_local(b, cfg.clone()), &cam, &settings))
}

pub fn neural_image_gen(gen: Arc<Generator>, cam: Camera, settings: RenderSettings) -> ImageGen<'static> {
    Box::new(move |b, s, w| render(&gen.field(b, s, w)?, &cam, &settings))
}

pub fn procedural_factory(cfg: ProceduralConfig) -> Box<FieldFactory<'static>> {
    Box::new(move |local, _| Ok(Box::new(ProceduralField::from_bev_local(local, cfg.clone())) as Box<dyn RadianceField + Send>))
}

pub fn neural_factory(gen: Arc<Generator>, s: LatentCode) -> Box<FieldFactory<'static>> {
    Box::new(move |local, w| Ok(Box::new(gen.field(local, &s, w)?) as Box<dyn RadianceField + Send>))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoLowpass,
    NoSel,
    NoPadding,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoLowpass, Ablation::NoSel, Ablation::NoPadding];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLowpass => "no_lowpass",
            Ablation::NoSel => "no_sel",
            Ablation::NoPadding => "no_padding",
        }
    }

    pub fn generator_config(self, base: &GeneratorConfig) -> GeneratorConfig {
        match self {
            Ablation::NoLowpass => GeneratorConfig { use_lowpass: false, ..base.clone() },
            Ablation::NoSel => GeneratorConfig { use_sel: false, ..base.clone() },
            Ablation::Full | Ablation::NoPadding => base.clone(),
        }
    }

    /// Generator config, input map, window and camera for one ablation row.
    ///
    /// Every row renders the same `v x v` view, `v = size - 2 * view_margin`,
    /// centered on `b`. Padded rows feed the whole map so the view stays
    /// clear of the feature-map borders; the no-padding row feeds only the
    /// tight crop under the view, so its borders coincide with the image edges.
    pub fn case(self, base: &GeneratorConfig, b: &BevMap, view_margin: usize) -> Result<AblationCase> {
        let (h, w) = (b.height(), b.width());
        if h != w || 2 * view_margin >= w {
            return Err(Error::InvalidArgument(format!("need a square map wider than twice the view margin, got {h}x{w}")));
        }
        let v = w - 2 * view_margin;
        let scale = b.transform().scale;
        let mut cfg = self.generator_config(base);
        let (map, window) = match self {
            Ablation::NoPadding => {
                let window = WindowSpec::new(view_margin as i64, view_margin as i64, v, v);
                cfg.input_res = v;
                cfg.bottleneck_res = v >> cfg.n_levels;
                (b.crop_window(&window)?, window)
            }
            _ => (b.clone(), WindowSpec::new(0, 0, h, w)),
        };
        let camera = view_camera(map.width(), v, scale, cfg.scene_height)?;
        Ok(AblationCase { config: cfg, map, window, camera, view: v })
    }
}

/// Orthographic top-down camera over the central `view x view` pixels of a
/// `canvas x canvas` local frame.
pub fn view_camera(canvas: usize, view: usize, scale: f64, scene_height: f64) -> Result<Camera> {
    let c = 0.5 * canvas as f64 / scale;
    let top = scene_height + 0.5;
    Camera::top_down(c, c, top, 0.5 * view as f64 / scale, 0.25, top + 0.25)
}

pub struct AblationCase {
    pub config: GeneratorConfig,
    pub map: BevMap,
    pub window: WindowSpec,
    pub camera: Camera,
    /// Rendered image side, pixels.
    pub view: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: Ablation,
    pub weight_seed: u64,
    pub eqt_db: f64,
    pub median_latent_db: f64,
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub weight_seeds: Vec<u64>,
    pub shifts: Vec<i64>,
    pub n_latents: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, config: Ablation, weight_seed: u64) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.config == config && r.weight_seed == weight_seed)
    }

    /// Seeds where `a`'s median per-latent EQT beats `b`'s.
    pub fn wins(&self, a: Ablation, b: Ablation) -> usize {
        self.weight_seeds
            .iter()
            .filter(|&&s| match (self.row(a, s), self.row(b, s)) {
                (Some(x), Some(y)) => x.median_latent_db > y.median_latent_db,
                _ => false,
            })
            .count()
    }

    /// One line per configuration, median per-latent EQT (dB) per weight seed.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<12}", "config");
        for s in &self.weight_seeds {
            let _ = write!(out, " {:>9}", format!("seed {s}"));
        }
        let _ = writeln!(out, " {:>9}", "median");
        let configs: Vec<Ablation> = Ablation::ALL.into_iter().filter(|a| self.rows.iter().any(|r| r.config == *a)).collect();
        for a in configs {
            let _ = write!(out, "{:<12}", a.name());
            let mut vals = Vec::new();
            for &s in &self.weight_seeds {
                match self.row(a, s) {
                    Some(r) => {
                        vals.push(r.median_latent_db);
                        let _ = write!(out, " {:>9.3}", r.median_latent_db);
                    }
                    None => {
                        let _ = write!(out, " {:>9}", "-");
                    }
                }
            }
            let _ = writeln!(out, " {:>9.3}", median(&vals));
        }
        out
    }
}

/// Neural EQT of every `ablations` entry for every weight seed. Weights are
/// drawn per seed from the ablated config, so paired rows share every tensor
/// the configs have in common.
pub fn run_ablation(
    base: &GeneratorConfig,
    b: &BevMap,
    view_margin: usize,
    weight_seeds: &[u64],
    ablations: &[Ablation],
    eqt_cfg: &EqtConfig,
    n_samples: usize,
    progress: &dyn Fn(Ablation, u64, &EqtReport),
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for &seed in weight_seeds {
        for &a in ablations {
            let case = a.case(base, b, view_margin)?;
            let gen = Arc::new(Generator::new(init_params(&case.config, seed)?)?);
            let settings = RenderSettings::new(case.view, case.view, n_samples);
            let report = eqt(neural_image_gen(gen, case.camera, settings), &case.map, &case.window, eqt_cfg)?;
            progress(a, seed, &report);
            rows.push(AblationRow {
                config: a,
                weight_seed: seed,
                eqt_db: report.eqt_db,
                median_latent_db: report.median_latent_db(),
                capped: report.capped,
            });
        }
    }
    Ok(AblationTable { weight_seeds: weight_seeds.to_vec(), shifts: eqt_cfg.shifts.clone(), n_latents: eqt_cfg.n_latents, rows })
}
