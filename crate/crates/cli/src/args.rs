use std::path::PathBuf;

use bevscene_core::bevmap::ChannelSchema;
use bevscene_core::generator::GeneratorConfig;
use bevscene_core::pipeline::{Ablation, FieldMode};
use bevscene_core::stitcher::Axis;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "bevscene", version, about = "Render, stitch and score BEV-conditioned scenes")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file whose keys override unset flags; a run manifest works too.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a random scene and write its semantic map.
    GenBev(GenBevArgs),
    /// Render one view of a map.
    Render(RenderArgs),
    /// Render the frames of a sliding-window traversal.
    Traverse(StitchArgs),
    /// Traverse and stitch the frames into a panorama.
    Stitch(StitchArgs),
    /// Measure translation equivariance.
    Eqt(EqtArgs),
    /// EQT of the full generator against its ablations.
    Ablate(AblateArgs),
    /// Write freshly initialized generator weights.
    InitWeights(InitWeightsArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenBev(_) => "gen-bev",
            Command::Render(_) => "render",
            Command::Traverse(_) => "traverse",
            Command::Stitch(_) => "stitch",
            Command::Eqt(_) => "eqt",
            Command::Ablate(_) => "ablate",
            Command::InitWeights(_) => "init-weights",
            Command::Serve(_) => "serve",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Procedural,
    Neural,
}

impl From<Mode> for FieldMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Procedural => FieldMode::Procedural,
            Mode::Neural => FieldMode::Neural,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Tiny,
    PaperScale,
}

impl Preset {
    pub fn config(self) -> GeneratorConfig {
        match self {
            Preset::Desk => GeneratorConfig::desk(),
            Preset::Tiny => GeneratorConfig::tiny(),
            Preset::PaperScale => GeneratorConfig::paper_scale(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    OnehotColorShape,
    Occupancy,
}

impl From<Schema> for ChannelSchema {
    fn from(s: Schema) -> Self {
        match s {
            Schema::OnehotColorShape => ChannelSchema::OnehotColorShape,
            Schema::Occupancy => ChannelSchema::Occupancy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewArg {
    Top,
    Front,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisArg {
    Columns,
    Rows,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Columns => Axis::Columns,
            AxisArg::Rows => Axis::Rows,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationArg {
    Full,
    NoLowpass,
    NoSel,
    NoPadding,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Full => Ablation::Full,
            AblationArg::NoLowpass => Ablation::NoLowpass,
            AblationArg::NoSel => Ablation::NoSel,
            AblationArg::NoPadding => Ablation::NoPadding,
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GenBevArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 12)]
    pub margin: usize,
    #[arg(long, default_value_t = 3)]
    pub n_min: usize,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    #[arg(long, value_enum, default_value = "onehot-color-shape")]
    pub schema: Schema,
}

/// Where the radiance field comes from.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "procedural")]
    pub mode: Mode,
    /// Generator weight file (neural mode).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Initialize weights from this seed instead of loading a file.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Architecture used with --init-seed.
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RenderArgs {
    /// Input .bev file.
    #[arg(long)]
    pub bev: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Latent seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub ssaa: usize,
    #[arg(long, value_enum, default_value = "top")]
    pub view: ViewArg,
    /// Camera as JSON; overrides --view.
    #[arg(long)]
    pub camera: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct StitchArgs {
    /// Input .bev file.
    #[arg(long)]
    pub bev: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Latent seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Window step in BEV pixels; several values run one traversal each.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub n_step: Vec<usize>,
    /// Square window side; defaults to the generator input size (neural)
    /// or the map height (procedural).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub frame_w: usize,
    #[arg(long, default_value_t = 64)]
    pub frame_h: usize,
    #[arg(long, default_value_t = 1.0)]
    pub f_norm: f64,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub ssaa: usize,
    #[arg(long, value_enum, default_value = "columns")]
    pub axis: AxisArg,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub cross_offset: i64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EqtArgs {
    /// Input .bev file.
    #[arg(long)]
    pub bev: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// First latent seed; latents use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub latents: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,2,4,8")]
    pub shifts: Vec<i64>,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Image border excluded from the comparison; default covers the
    /// filter support plus the largest shift.
    #[arg(long)]
    pub crop: Option<usize>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct AblateArgs {
    /// Input map; without it a scene is sampled from --scene-seed.
    #[arg(long)]
    pub bev: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub scene_seed: u64,
    /// Map side used when sampling the scene.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Band around the rendered view that only padded configs see.
    #[arg(long, default_value_t = 8)]
    pub view_margin: usize,
    /// Weight seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "full,no-lowpass,no-sel,no-padding")]
    pub ablations: Vec<AblationArg>,
    #[arg(long, default_value_t = 3)]
    pub latents: usize,
    #[arg(long, default_value_t = 0)]
    pub latent_seed: u64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,2,4,8")]
    pub shifts: Vec<i64>,
    #[arg(long, default_value_t = 8)]
    pub crop: usize,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct InitWeightsArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    /// Bind address; defaults to $BEVSCENE_ADDR or 127.0.0.1:8787.
    #[arg(long)]
    pub addr: Option<String>,
    /// Session snapshot file; defaults to $BEVSCENE_SNAPSHOT.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
