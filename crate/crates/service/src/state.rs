use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use bevscene_core::bevmap::{rasterize, BevLayout, BevMap, ChannelSchema, Edit, SceneObject, SceneSampler};
use bevscene_core::generator::{init_params, Generator, GeneratorConfig};
use bevscene_core::pipeline::{top_down_camera, FieldMode};
use bevscene_core::renderer::{Camera, ProceduralConfig};
use bevscene_core::stitcher::StitchReport;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn default_margin() -> usize {
    12
}

fn default_mode() -> FieldMode {
    FieldMode::Procedural
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub height: usize,
    pub width: usize,
    #[serde(default = "default_margin")]
    pub margin_px: usize,
    #[serde(default)]
    pub schema: Option<ChannelSchema>,
    /// Sample a scene with this seed; absent means an empty map.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub n_objects: Option<[usize; 2]>,
    #[serde(default = "default_mode")]
    pub mode: FieldMode,
    #[serde(default)]
    pub latent_seed: u64,
    #[serde(default)]
    pub weight_seed: u64,
    #[serde(default)]
    pub gen_config: Option<GeneratorConfig>,
    #[serde(default)]
    pub procedural: Option<ProceduralConfig>,
}

/// Everything needed to rebuild a session.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub version: u64,
    pub layout: BevLayout,
    pub objects: Vec<SceneObject>,
    pub mode: FieldMode,
    pub latent_seed: u64,
    pub weight_seed: u64,
    pub gen_config: GeneratorConfig,
    pub procedural: ProceduralConfig,
    pub camera: Camera,
    pub created_at: u64,
    pub last_modified: u64,
}

pub struct Session {
    pub record: SessionRecord,
    pub bev: BevMap,
    generator: Option<Arc<Generator>>,
}

/// Immutable copy taken at request start.
#[derive(Clone)]
pub struct Snapshot {
    pub record: SessionRecord,
    pub bev: BevMap,
    pub generator: Option<Arc<Generator>>,
}

impl Session {
    fn build(record: SessionRecord) -> ApiResult<Self> {
        let bev = rasterize(&record.objects, &record.layout)?;
        let generator = match record.mode {
            FieldMode::Neural => {
                let cfg = &record.gen_config;
                if (cfg.input_res, cfg.input_res) != (bev.height(), bev.width()) || cfg.bev_channels != bev.channels() {
                    return Err(ApiError::BadRequest(format!(
                        "neural mode needs a {0}x{0} map with {1} channels",
                        cfg.input_res, cfg.bev_channels
                    )));
                }
                Some(Arc::new(Generator::new(init_params(cfg, record.weight_seed)?)?))
            }
            FieldMode::Procedural => None,
        };
        Ok(Self { record, bev, generator })
    }

    pub fn create(req: CreateSession) -> ApiResult<Self> {
        let mut layout = BevLayout::clevr(req.height, req.width, req.margin_px);
        if let Some(schema) = req.schema {
            layout.schema = schema;
        }
        layout.validate()?;
        let objects = match req.seed {
            Some(seed) => {
                let [lo, hi] = req.n_objects.unwrap_or([3, 8]);
                SceneSampler::with_count(lo, hi).sample(seed, &layout)?
            }
            None => Vec::new(),
        };
        let gen_config = req.gen_config.unwrap_or_default();
        let procedural = req.procedural.unwrap_or_default();
        let camera = top_down_camera(layout.height, layout.width, layout.transform.scale, gen_config.scene_height)?;
        let t = now_ms();
        Self::build(SessionRecord {
            id: uuid::Uuid::new_v4().to_string(),
            version: 0,
            layout,
            objects,
            mode: req.mode,
            latent_seed: req.latent_seed,
            weight_seed: req.weight_seed,
            gen_config,
            procedural,
            camera,
            created_at: t,
            last_modified: t,
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { record: self.record.clone(), bev: self.bev.clone(), generator: self.generator.clone() }
    }

    /// Applies `edit`; on error the session is untouched.
    pub fn apply(&mut self, edit: &Edit) -> ApiResult<()> {
        let next = self.bev.edit(edit)?;
        next.check_invariants()?;
        self.record.objects = next.objects().to_vec();
        self.bev = next;
        self.record.version += 1;
        self.record.last_modified = now_ms();
        Ok(())
    }

    pub fn set_camera(&mut self, camera: Camera) -> ApiResult<()> {
        camera.validate()?;
        self.record.camera = camera;
        self.record.version += 1;
        self.record.last_modified = now_ms();
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.record.id,
            "version": self.record.version,
            "mode": self.record.mode,
            "dims": [self.bev.height(), self.bev.width(), self.bev.channels()],
            "margin_px": self.bev.margin_px(),
            "objects": self.record.objects,
            "nonzero_pixels": self.bev.nonzero_pixels(),
            "latent_seed": self.record.latent_seed,
            "weight_seed": self.record.weight_seed,
            "camera": self.record.camera,
            "created_at": self.record.created_at,
            "last_modified": self.record.last_modified,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

pub struct Job {
    pub id: String,
    pub session: String,
    pub state: JobState,
    pub done: usize,
    pub total: usize,
    pub report: Option<StitchReport>,
    pub panorama_png: Option<Vec<u8>>,
    pub error: Option<String>,
}

impl Job {
    pub fn status(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.id,
            "session": self.session,
            "state": self.state,
            "progress": { "done": self.done, "total": self.total },
            "report": self.report,
            "panorama": self.panorama_png.as_ref().map(|_| format!("/v1/jobs/{}/panorama", self.id)),
            "error": self.error,
        })
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
    jobs: Arc<RwLock<HashMap<String, Arc<Mutex<Job>>>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_session(&self, s: Session) -> Arc<Mutex<Session>> {
        let id = s.record.id.clone();
        let s = Arc::new(Mutex::new(s));
        self.sessions.write().unwrap().insert(id, s.clone());
        s
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    pub fn insert_job(&self, job: Job) -> Arc<Mutex<Job>> {
        let id = job.id.clone();
        let job = Arc::new(Mutex::new(job));
        self.jobs.write().unwrap().insert(id, job.clone());
        job
    }

    pub fn job(&self, id: &str) -> ApiResult<Arc<Mutex<Job>>> {
        self.jobs.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("no job {id}")))
    }

    /// All sessions as JSON records, sorted by id.
    pub fn dump(&self) -> Vec<SessionRecord> {
        let mut out: Vec<SessionRecord> =
            self.sessions.read().unwrap().values().map(|s| s.lock().unwrap().record.clone()).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn restore(&self, records: Vec<SessionRecord>) -> ApiResult<usize> {
        let n = records.len();
        for r in records {
            self.insert_session(Session::build(r)?);
        }
        Ok(n)
    }
}
