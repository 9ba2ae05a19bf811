use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bevscene_core::bevmap::{BevLayout, BevMap, SceneSampler, WindowSpec};
use bevscene_core::generator::{init_params, Generator, GeneratorConfig, GeneratorParams, LatentCode};
use bevscene_core::metrics::EqtConfig;
use bevscene_core::pipeline::{
    front_camera, neural_factory, neural_image_gen, procedural_factory, procedural_image_gen, run_ablation,
    sample_scene, top_down_camera, Ablation,
};
use bevscene_core::renderer::{render, Camera, Image, ProceduralConfig, ProceduralField, RenderSettings};
use bevscene_core::stitcher::{stitch, traverse, FieldFactory, StitchConfig, StitchReport};
use serde_json::json;

use crate::args::*;
use crate::manifest::RunManifest;

pub struct Run<'a> {
    pub out: &'a Path,
    pub manifest: RunManifest,
    start: Instant,
}

impl<'a> Run<'a> {
    pub fn new(out: &'a Path, manifest: RunManifest) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { out, manifest, start: Instant::now() })
    }

    fn write(&mut self, rel: impl Into<PathBuf>, bytes: &[u8]) -> Result<()> {
        let rel = rel.into();
        let path = self.out.join(&rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(rel);
        Ok(())
    }

    fn write_json(&mut self, rel: &str, v: &impl serde::Serialize) -> Result<()> {
        self.write(rel, &serde_json::to_vec_pretty(v)?)
    }

    fn write_png(&mut self, rel: impl Into<PathBuf>, img: &Image) -> Result<()> {
        self.write(rel, &img.to_png(true)?)
    }

    fn time(&mut self, stage: &str, since: Instant) {
        self.manifest.timings_ms.insert(stage.into(), since.elapsed().as_secs_f64() * 1e3);
    }

    pub fn finish(mut self) -> Result<()> {
        self.time("total", self.start);
        self.manifest.write(self.out)
    }
}

/// `--bev` is optional to clap so that a config file can supply it.
fn required_bev(path: &Option<PathBuf>) -> Result<BevMap> {
    load_bev(path.as_deref().context("--bev is required")?)
}

fn load_bev(path: &Path) -> Result<BevMap> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    BevMap::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn load_generator(m: &ModelArgs) -> Result<Option<Arc<Generator>>> {
    if m.mode == Mode::Procedural {
        return Ok(None);
    }
    let params = match (&m.weights, m.init_seed) {
        (Some(path), _) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            GeneratorParams::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))?
        }
        (None, Some(seed)) => init_params(&m.preset.config(), seed)?,
        (None, None) => bail!("neural mode needs --weights or --init-seed"),
    };
    Ok(Some(Arc::new(Generator::new(params)?)))
}

fn scene_height(gen: &Option<Arc<Generator>>) -> f64 {
    gen.as_ref().map_or_else(|| GeneratorConfig::default().scene_height, |g| g.config().scene_height)
}

pub fn gen_bev(a: &GenBevArgs, run: &mut Run) -> Result<()> {
    let mut layout = BevLayout::clevr(a.height, a.width, a.margin);
    layout.schema = a.schema.into();
    let t = Instant::now();
    let b = sample_scene(a.seed, &layout, &SceneSampler::with_count(a.n_min, a.n_max))?;
    b.check_invariants()?;
    run.time("sample", t);
    run.write("scene.bev", &b.to_bytes()?)?;
    run.write_json("scene.json", &json!({ "layout": b.layout(), "objects": b.objects() }))?;
    println!("scene.bev: {} objects on {}x{}x{}", b.objects().len(), b.height(), b.width(), b.channels());
    Ok(())
}

pub fn render_cmd(a: &RenderArgs, run: &mut Run) -> Result<()> {
    let b = required_bev(&a.bev)?;
    let gen = load_generator(&a.model)?;
    let scale = b.transform().scale;
    let cam = match &a.camera {
        Some(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let cam: Camera = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
            cam.validate()?;
            cam
        }
        None => match a.view {
            ViewArg::Top => top_down_camera(b.height(), b.width(), scale, scene_height(&gen))?,
            ViewArg::Front => front_camera(b.height(), b.width(), scale, scene_height(&gen))?,
        },
    };
    let settings = RenderSettings::new(a.width, a.height, a.samples).with_ssaa(a.ssaa);
    let t = Instant::now();
    let img = match &gen {
        Some(g) => {
            let s = LatentCode::sample(a.seed, g.config().latent_dim);
            render(&g.field(&b, &s, &WindowSpec::full(&b))?, &cam, &settings)?
        }
        None => render(&ProceduralField::from_bev_local(&b, ProceduralConfig::default()), &cam, &settings)?,
    };
    run.time("render", t);
    run.write_png("render.png", &img)?;
    println!("render.png: {}x{}, high-frequency energy {:.6}", a.width, a.height, img.high_frequency_energy());
    Ok(())
}

pub fn stitch_cmd(a: &StitchArgs, with_panorama: bool, run: &mut Run) -> Result<()> {
    if a.n_step.is_empty() {
        bail!("--n-step needs at least one value");
    }
    let b = required_bev(&a.bev)?;
    let gen = load_generator(&a.model)?;
    let window = a.window.unwrap_or_else(|| gen.as_ref().map_or(b.height(), |g| g.config().input_res));
    let factory: Box<FieldFactory<'static>> = match &gen {
        Some(g) => neural_factory(g.clone(), LatentCode::sample(a.seed, g.config().latent_dim)),
        None => procedural_factory(ProceduralConfig::default()),
    };
    for &n in &a.n_step {
        let cfg = StitchConfig {
            frame_w: a.frame_w,
            frame_h: a.frame_h,
            f_norm: a.f_norm,
            n_samples: a.samples,
            ssaa: a.ssaa,
            axis: a.axis.into(),
            cross_offset: a.cross_offset,
            ..StitchConfig::new(window, n)
        };
        cfg.validate()?;
        let dir = if a.n_step.len() == 1 { PathBuf::new() } else { PathBuf::from(format!("n_step_{n:02}")) };
        let rig = cfg.rig(b.transform().scale)?;
        let t = Instant::now();
        let frames = traverse(factory.as_ref(), &b, &cfg, &rig, &|_, _| {})?;
        run.time(&format!("traverse_n{n}"), t);
        for (i, f) in frames.iter().enumerate() {
            run.write_png(dir.join("frames").join(format!("{i:05}.png")), f)?;
        }
        if with_panorama {
            let pano = stitch(&frames, &cfg)?;
            let report = StitchReport::new(&cfg, frames.len(), &pano);
            run.write_png(dir.join("panorama.png"), &pano)?;
            run.write(dir.join("stitch_report.json"), &serde_json::to_vec_pretty(&report)?)?;
            println!("n_step {n}: K={} n_loc={} panorama {}x{}", report.k, report.n_loc, pano.height(), pano.width());
        } else {
            println!("n_step {n}: {} frames", frames.len());
        }
    }
    Ok(())
}

pub fn eqt_cmd(a: &EqtArgs, run: &mut Run) -> Result<()> {
    let b = required_bev(&a.bev)?;
    let gen = load_generator(&a.model)?;
    let cam = top_down_camera(b.height(), b.width(), b.transform().scale, scene_height(&gen))?;
    let settings = RenderSettings::new(b.width(), b.height(), a.samples);
    let latent_dim = gen.as_ref().map_or(a.model.preset.config().latent_dim, |g| g.config().latent_dim);
    let image_gen = match &gen {
        Some(g) => neural_image_gen(g.clone(), cam, settings),
        None => procedural_image_gen(ProceduralConfig::default(), cam, settings),
    };
    let cfg = EqtConfig { latent_seed: a.seed, crop_border: a.crop, ..EqtConfig::new(a.latents, latent_dim, a.shifts.clone()) };
    let t = Instant::now();
    let report = bevscene_core::metrics::eqt(image_gen, &b, &WindowSpec::full(&b), &cfg)?;
    run.time("eqt", t);
    run.write_json("eqt_report.json", &json!({ "eqt": report, "fid": "unavailable" }))?;
    println!(
        "EQT {:.3} dB{} (median per latent {:.3} dB, {} latents x {} shifts); FID unavailable",
        report.eqt_db,
        if report.capped { " (capped)" } else { "" },
        report.median_latent_db(),
        report.n_latents,
        report.n_shifts
    );
    Ok(())
}

pub fn ablate_cmd(a: &AblateArgs, run: &mut Run) -> Result<()> {
    let b = match &a.bev {
        Some(p) => load_bev(p)?,
        None => sample_scene(a.scene_seed, &BevLayout::clevr(a.size, a.size, a.view_margin), &SceneSampler::default())?,
    };
    let base = a.preset.config();
    let ablations: Vec<Ablation> = a.ablations.iter().map(|&x| x.into()).collect();
    let eqt_cfg = EqtConfig {
        latent_seed: a.latent_seed,
        crop_border: Some(a.crop),
        ..EqtConfig::new(a.latents, base.latent_dim, a.shifts.clone())
    };
    let t = Instant::now();
    let table = run_ablation(&base, &b, a.view_margin, &a.seeds, &ablations, &eqt_cfg, a.samples, &|abl, seed, r| {
        println!("{:<12} seed {seed}: median per latent {:.3} dB", abl.name(), r.median_latent_db());
    })?;
    run.time("ablate", t);
    let text = table.to_text();
    run.write("ablation.txt", text.as_bytes())?;
    let mut comparisons = serde_json::Map::new();
    for other in [Ablation::NoLowpass, Ablation::NoSel, Ablation::NoPadding] {
        if ablations.contains(&Ablation::Full) && ablations.contains(&other) {
            comparisons.insert(
                format!("full_beats_{}", other.name()),
                json!({ "wins": table.wins(Ablation::Full, other), "of": a.seeds.len() }),
            );
        }
    }
    run.write_json("ablation.json", &json!({ "table": table, "comparisons": comparisons }))?;
    print!("{text}");
    Ok(())
}

pub fn init_weights(a: &InitWeightsArgs, run: &mut Run) -> Result<()> {
    let params = init_params(&a.preset.config(), a.seed)?;
    run.write("weights.berfw", &params.to_bytes()?)?;
    println!("weights.berfw: {} weights", params.num_weights());
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let mut cfg = bevscene_service::ServeConfig::from_env().map_err(anyhow::Error::msg)?;
    if let Some(addr) = &a.addr {
        cfg.addr = addr.parse().with_context(|| format!("bad --addr {addr:?}"))?;
    }
    if a.snapshot.is_some() {
        cfg.snapshot = a.snapshot.clone();
    }
    let _ = tracing_subscriber::fmt().try_init();
    tokio::runtime::Runtime::new()?.block_on(bevscene_service::serve(cfg)).map_err(anyhow::Error::msg)
}
