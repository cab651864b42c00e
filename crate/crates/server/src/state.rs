//! Shared service state: the immutable generator and scenario table, the
//! model and direction registries, sessions and inversion jobs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use tokio::sync::Semaphore;

use styleprobe::classifier::{load_model, ClassifierModel};
use styleprobe::codec;
use styleprobe::config::WorkbenchConfig;
use styleprobe::directions::{load_direction, save_direction, DirectionModel};
use styleprobe::generator::{Generator, ImageBuffer};
use styleprobe::inversion::{InversionObserver, JobState};
use styleprobe::scenario::{find_scenario, SceneSpec};

use crate::error::{ApiError, ApiResult};
use crate::session::Session;

pub const MODEL_EXTENSION: &str = "spm";

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InversionOutcome {
    pub slot: String,
    pub style: styleprobe::generator::StyleVector,
    pub final_loss: f64,
    pub image: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub session_id: String,
    pub kind: String,
    pub state: JobState,
    pub progress: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_loss: Option<f64>,
    /// Present iff `state` is `done`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<InversionOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Job {
    pub record: Mutex<JobRecord>,
    pub cancel: AtomicBool,
}

impl Job {
    pub fn snapshot(&self) -> JobRecord {
        self.record.lock().expect("job lock").clone()
    }

    pub fn is_running(&self) -> bool {
        self.record.lock().expect("job lock").state == JobState::Running
    }
}

impl InversionObserver for Job {
    fn on_progress(&self, done: usize, total: usize, best_loss: f64) {
        let mut r = self.record.lock().expect("job lock");
        let p = if total == 0 {
            1.0
        } else {
            done as f64 / total as f64
        };
        // Progress never moves backwards, and stays below 1 until the slot exists.
        r.progress = r.progress.max(p.min(0.999));
        r.best_loss = Some(best_loss);
    }

    fn cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }
}

pub struct Inner {
    pub config: WorkbenchConfig,
    pub generator: Arc<Generator>,
    pub scenarios: Vec<SceneSpec>,
    pub models: RwLock<BTreeMap<String, Arc<ClassifierModel>>>,
    pub directions: RwLock<BTreeMap<String, Arc<DirectionModel>>>,
    pub sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    pub jobs: Mutex<HashMap<String, Arc<Job>>>,
    pub workers: Arc<Semaphore>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Inner>);

impl std::ops::Deref for AppState {
    type Target = Inner;

    fn deref(&self) -> &Inner {
        &self.0
    }
}

impl AppState {
    /// Builds the state without touching the disk.
    pub fn new(config: WorkbenchConfig) -> styleprobe::Result<Self> {
        config.validate()?;
        let generator = Arc::new(Generator::new(config.generator.clone())?);
        let scenarios = config.scenarios();
        let workers = Arc::new(Semaphore::new(config.service.workers));
        Ok(Self(Arc::new(Inner {
            config,
            generator,
            scenarios,
            models: RwLock::default(),
            directions: RwLock::default(),
            sessions: Mutex::default(),
            jobs: Mutex::default(),
            workers,
            next_id: AtomicU64::new(1),
        })))
    }

    /// Builds the state and loads `models/*.spm` and `directions/*.json`
    /// from the configured data directory (missing directories are fine).
    pub fn load(config: WorkbenchConfig) -> styleprobe::Result<Self> {
        let state = Self::new(config)?;
        let data = state.config.service.data_dir.clone();
        for (path, id) in list_files(&data.join("models"), MODEL_EXTENSION)? {
            state.insert_model(&id, load_model(&path)?);
            tracing::info!(model = %id, "loaded model");
        }
        for (path, id) in list_files(&data.join("directions"), "json")? {
            state.insert_direction(&id, load_direction(&path)?);
            tracing::info!(direction = %id, "loaded direction");
        }
        Ok(state)
    }

    pub fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    pub fn insert_model(&self, id: &str, model: ClassifierModel) {
        self.models
            .write()
            .expect("models lock")
            .insert(id.to_string(), Arc::new(model));
    }

    pub fn model(&self, id: &str) -> ApiResult<Arc<ClassifierModel>> {
        self.models
            .read()
            .expect("models lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("model", id))
    }

    pub fn insert_direction(&self, id: &str, dir: DirectionModel) {
        self.directions
            .write()
            .expect("directions lock")
            .insert(id.to_string(), Arc::new(dir));
    }

    pub fn direction(&self, id: &str) -> ApiResult<Arc<DirectionModel>> {
        self.directions
            .read()
            .expect("directions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("direction", id))
    }

    /// Registers and persists a direction under an unused id.
    pub fn store_direction(&self, dir: DirectionModel) -> ApiResult<String> {
        let id = loop {
            let candidate = self.fresh_id("dir-");
            if !self
                .directions
                .read()
                .expect("directions lock")
                .contains_key(&candidate)
            {
                break candidate;
            }
        };
        let folder = self.config.service.data_dir.join("directions");
        fs::create_dir_all(&folder).map_err(|e| ApiError::internal(e.to_string()))?;
        save_direction(&dir, folder.join(format!("{id}.json")))?;
        self.insert_direction(&id, dir);
        Ok(id)
    }

    pub fn scenario(&self, id: &str) -> ApiResult<&SceneSpec> {
        find_scenario(&self.scenarios, id).map_err(|_| ApiError::not_found("scenario", id))
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn job(&self, id: &str) -> ApiResult<Arc<Job>> {
        self.jobs
            .lock()
            .expect("jobs lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }

    /// Encodes an image as base64 PNG and scores the decoded pixels, so the
    /// score can be reproduced from the response alone.
    pub fn present(
        &self,
        model: &ClassifierModel,
        image: &ImageBuffer,
    ) -> ApiResult<(String, f64)> {
        let shown = codec::quantized(image);
        let score = model.score(&shown)?;
        Ok((codec::encode_png_base64(&shown)?, score))
    }
}

fn list_files(
    dir: &Path,
    extension: &str,
) -> styleprobe::Result<Vec<(std::path::PathBuf, String)>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(extension) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((path.clone(), stem.to_string()));
            }
        }
    }
    out.sort();
    Ok(out)
}
