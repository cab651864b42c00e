//! HTTP routes. Bodies are JSON, images travel as base64 PNG and every
//! score is computed on the decoded PNG pixels.

use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use styleprobe::attribution::{self, AttributionMap, Method};
use styleprobe::classifier::{ClassifierModel, OutputHead};
use styleprobe::codec;
use styleprobe::directions::{self, DirectionFitConfig, DirectionModel};
use styleprobe::generator::{ImageBuffer, LatentCode, LayerGrouping, StyleVector};
use styleprobe::inversion::{
    invert_observed, InversionObserver, InversionResult, JobState, LossMode,
};
use styleprobe::numeric::Rng;
use styleprobe::scenario::SceneSpec;
use styleprobe::Error as CoreError;

use crate::error::{ApiError, ApiResult};
use crate::session::{GroupChoice, HistoryEntry, Session, SessionSnapshot};
use crate::state::{AppState, InversionOutcome, Job, JobRecord};

/// Largest `count` a single generate call accepts.
pub const MAX_GENERATE: usize = 256;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/config", get(get_config))
        .route("/sessions", post(create_session))
        .route("/sessions/restore", post(restore_session))
        .route("/sessions/{id}", get(get_session))
        .route(
            "/sessions/{id}/snapshot",
            get(get_snapshot).post(save_snapshot),
        )
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/mix", post(mix))
        .route("/sessions/{id}/views", post(views))
        .route("/sessions/{id}/invert", post(invert))
        .route("/sessions/{id}/sweep", post(sweep))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/cancel", post(cancel_job))
        .route("/directions/fit", post(fit_direction))
        .route("/directions/{id}", get(get_direction))
        .route("/attribution", post(attribution))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

type Body<T> = Result<Json<T>, JsonRejection>;

fn body<T>(b: Body<T>) -> ApiResult<T> {
    Ok(b?.0)
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn lock(session: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Serialize)]
struct ModelInfo {
    id: String,
    scenario: String,
    head: OutputHead,
}

#[derive(Serialize)]
struct ConfigView {
    layers: usize,
    latent_dim: usize,
    style_dim: usize,
    /// 1-based layer indices per group.
    grouping: Vec<Vec<usize>>,
    image_size: usize,
    output_count: usize,
    default_lambdas: Vec<f64>,
    scenarios: Vec<SceneSpec>,
    models: Vec<ModelInfo>,
    directions: Vec<String>,
}

async fn get_config(State(state): State<AppState>) -> Json<ConfigView> {
    let g = &state.config.generator;
    let models = state
        .models
        .read()
        .expect("models lock")
        .iter()
        .map(|(id, m)| ModelInfo {
            id: id.clone(),
            scenario: m.scenario.clone(),
            head: m.head().clone(),
        })
        .collect();
    Json(ConfigView {
        layers: g.layers,
        latent_dim: g.latent_dim,
        style_dim: g.style_dim,
        grouping: g.grouping.as_lists(),
        image_size: g.image_size,
        output_count: g.output_count,
        default_lambdas: state.config.directions.lambdas.clone(),
        scenarios: state.scenarios.clone(),
        models,
        directions: state
            .directions
            .read()
            .expect("directions lock")
            .keys()
            .cloned()
            .collect(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    scenario: String,
    model_id: String,
    /// Group sizes; defaults to the generator's grouping.
    grouping: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub scenario: String,
    pub model_id: String,
    pub grouping: Vec<Vec<usize>>,
    pub slots: Vec<String>,
    pub assignment: Vec<GroupChoice>,
    pub history_len: usize,
    pub image: String,
    pub score: f64,
}

struct Context {
    scene: SceneSpec,
    model: Arc<ClassifierModel>,
}

fn context(state: &AppState, scenario: &str, model_id: &str) -> ApiResult<Context> {
    let scene = state.scenario(scenario)?.clone();
    let model = state.model(model_id)?;
    if model.scenario != scene.id {
        return Err(ApiError::bad_request(format!(
            "model `{model_id}` was trained on `{}`, not `{}`",
            model.scenario, scene.id
        )));
    }
    if model.input_size() != state.generator.image_size() {
        return Err(ApiError::bad_request(format!(
            "model expects {0}×{0} images, generator renders {1}×{1}",
            model.input_size(),
            state.generator.image_size()
        )));
    }
    Ok(Context { scene, model })
}

fn session_context(state: &AppState, session: &Session) -> ApiResult<Context> {
    context(state, &session.state.scenario, &session.state.model_id)
}

fn render_choices(
    state: &AppState,
    ctx: &Context,
    session: &Session,
    choices: &[GroupChoice],
) -> ApiResult<(String, f64)> {
    let assignment = session.resolve(choices)?;
    let image = state.generator.synthesize(&assignment, &ctx.scene)?;
    state.present(&ctx.model, &image)
}

fn session_view(state: &AppState, session: &Session) -> ApiResult<SessionView> {
    let ctx = session_context(state, session)?;
    let (image, score) = render_choices(state, &ctx, session, &session.state.assignment)?;
    Ok(SessionView {
        id: session.id.clone(),
        scenario: session.state.scenario.clone(),
        model_id: session.state.model_id.clone(),
        grouping: session.state.grouping.as_lists(),
        slots: session.slot_names(),
        assignment: session.state.assignment.clone(),
        history_len: session.state.history.len(),
        image,
        score,
    })
}

fn register(state: &AppState, session: Session) -> ApiResult<SessionView> {
    let view = session_view(state, &session)?;
    state
        .sessions
        .lock()
        .expect("sessions lock")
        .insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok(view)
}

async fn create_session(
    State(state): State<AppState>,
    req: Body<CreateSession>,
) -> ApiResult<Json<SessionView>> {
    let req = body(req)?;
    let ctx = context(&state, &req.scenario, &req.model_id)?;
    let grouping = match req.grouping {
        Some(sizes) => LayerGrouping::from_sizes(sizes)?,
        None => state.config.generator.grouping.clone(),
    };
    if grouping.layer_count() != state.generator.layers() {
        return Err(ApiError::bad_request(format!(
            "grouping covers {} layers, generator has {}",
            grouping.layer_count(),
            state.generator.layers()
        )));
    }
    let base = state
        .generator
        .map_latent(&LatentCode::zeros(state.config.generator.latent_dim))?;
    let session = Session::new(
        state.fresh_id("s-"),
        ctx.scene.id.clone(),
        req.model_id,
        grouping,
        base,
    );
    blocking(move || register(&state, session)).await.map(Json)
}

async fn restore_session(
    State(state): State<AppState>,
    req: Body<SessionSnapshot>,
) -> ApiResult<Json<SessionView>> {
    let snapshot = body(req)?;
    context(&state, &snapshot.scenario, &snapshot.model_id)?;
    if snapshot.grouping.layer_count() != state.generator.layers() {
        return Err(ApiError::bad_request(
            "snapshot grouping does not match the generator",
        ));
    }
    if let Some(s) = snapshot
        .slots
        .iter()
        .find(|s| s.style.len() != state.generator.style_dim())
    {
        return Err(ApiError::bad_request(format!(
            "slot `{}` has the wrong style dimension",
            s.name
        )));
    }
    let session = Session::restore(state.fresh_id("s-"), snapshot)?;
    blocking(move || register(&state, session)).await.map(Json)
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let session = state.session(&id)?;
    blocking(move || session_view(&state, &lock(&session)))
        .await
        .map(Json)
}

async fn get_snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionSnapshot>> {
    let session = state.session(&id)?;
    let snapshot = lock(&session).state.clone();
    Ok(Json(snapshot))
}

/// Writes `sessions/{id}.json` under the data directory.
async fn save_snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionSnapshot>> {
    let session = state.session(&id)?;
    let snapshot = lock(&session).state.clone();
    let folder = state.config.service.data_dir.join("sessions");
    let text =
        serde_json::to_vec_pretty(&snapshot).map_err(|e| ApiError::internal(e.to_string()))?;
    std::fs::create_dir_all(&folder)
        .and_then(|_| std::fs::write(folder.join(format!("{id}.json")), text))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(snapshot))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct GenerateRequest {
    count: Option<usize>,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
pub struct ScoredImage {
    pub slot: String,
    pub image: String,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
pub struct GenerateResponse {
    pub seed: u64,
    /// Score descending; equal scores keep slot creation order.
    pub items: Vec<ScoredImage>,
}

async fn generate(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Body<GenerateRequest>,
) -> ApiResult<Json<GenerateResponse>> {
    let req = body(req)?;
    let count = req.count.unwrap_or(state.config.generator.output_count);
    if count == 0 || count > MAX_GENERATE {
        return Err(ApiError::bad_request(format!(
            "count must be in 1..={MAX_GENERATE}"
        )));
    }
    let session = state.session(&id)?;
    blocking(move || {
        let mut s = lock(&session);
        let ctx = session_context(&state, &s)?;
        let seed = match req.seed {
            Some(seed) => seed,
            None => {
                s.state.next_seed += 1;
                s.state.next_seed - 1
            }
        };
        let rng = Rng::new(seed).derive("generate");
        let mut items = Vec::with_capacity(count);
        for i in 0..count {
            let style = state
                .generator
                .sample_style(&mut rng.derive_index(i as u64));
            let (image, score) = state.present(
                &ctx.model,
                &state.generator.synthesize_style(&style, &ctx.scene)?,
            )?;
            let slot = s.add_slot("g", style);
            items.push(ScoredImage { slot, image, score });
        }
        items.sort_by(|a, b| b.score.total_cmp(&a.score));
        Ok(Json(GenerateResponse { seed, items }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixRequest {
    assignment: Vec<GroupChoice>,
}

#[derive(Serialize, Deserialize)]
pub struct MixResponse {
    pub image: String,
    pub score: f64,
    pub history_len: usize,
}

async fn mix(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Body<MixRequest>,
) -> ApiResult<Json<MixResponse>> {
    let req = body(req)?;
    let session = state.session(&id)?;
    blocking(move || {
        let mut s = lock(&session);
        let ctx = session_context(&state, &s)?;
        let (image, score) = render_choices(&state, &ctx, &s, &req.assignment)?;
        s.state.history.push(HistoryEntry {
            assignment: req.assignment.clone(),
            score,
        });
        s.state.assignment = req.assignment;
        Ok(Json(MixResponse {
            image,
            score,
            history_len: s.state.history.len(),
        }))
    })
    .await
}

#[derive(Clone, Copy, Deserialize, Serialize, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    Result,
    Style,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewsRequest {
    mode: ViewMode,
}

#[derive(Serialize, Deserialize)]
pub struct Thumbnail {
    pub group: usize,
    pub slot: String,
    pub image: String,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
pub struct ViewsResponse {
    pub mode: ViewMode,
    pub thumbnails: Vec<Thumbnail>,
}

async fn views(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Body<ViewsRequest>,
) -> ApiResult<Json<ViewsResponse>> {
    let mode = body(req)?.mode;
    let session = state.session(&id)?;
    blocking(move || {
        let s = lock(&session);
        let ctx = session_context(&state, &s)?;
        let groups = s.state.grouping.group_count();
        let mut thumbnails = Vec::new();
        for slot in s.slot_names() {
            let single = GroupChoice::Single { slot: slot.clone() };
            // A style view does not depend on the group, render it once.
            let style_view = match mode {
                ViewMode::Style => Some(render_choices(
                    &state,
                    &ctx,
                    &s,
                    &vec![single.clone(); groups],
                )?),
                ViewMode::Result => None,
            };
            for group in 0..groups {
                let (image, score) = match &style_view {
                    Some(v) => v.clone(),
                    None => {
                        let mut choices = s.state.assignment.clone();
                        choices[group] = single.clone();
                        render_choices(&state, &ctx, &s, &choices)?
                    }
                };
                thumbnails.push(Thumbnail {
                    group,
                    slot: slot.clone(),
                    image,
                    score,
                });
            }
        }
        Ok(Json(ViewsResponse { mode, thumbnails }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InvertRequest {
    image: String,
    restarts: Option<usize>,
    steps: Option<usize>,
    lr: Option<f64>,
    loss: Option<LossMode>,
    seed: Option<u64>,
}

async fn invert(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Body<InvertRequest>,
) -> ApiResult<(StatusCode, Json<JobRecord>)> {
    let req = body(req)?;
    let target = codec::decode_png_base64(&req.image)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "undecodable_image", e.to_string()))?;
    let size = state.generator.image_size();
    target.ensure_dims(size, size)?;
    let mut cfg = state.config.inversion.clone();
    cfg.restarts = req.restarts.unwrap_or(cfg.restarts);
    cfg.steps = req.steps.unwrap_or(cfg.steps);
    cfg.lr = req.lr.unwrap_or(cfg.lr);
    cfg.loss = req.loss.unwrap_or(cfg.loss);
    cfg.seed = req.seed.unwrap_or(cfg.seed);
    cfg.validate()?;

    let session = state.session(&id)?;
    let (job, scene) = {
        let mut s = lock(&session);
        let ctx = session_context(&state, &s)?;
        if let Some(active) = &s.active_job {
            if state.job(active).map(|j| j.is_running()).unwrap_or(false) {
                return Err(ApiError::conflict(format!(
                    "session already has an active inversion job `{active}`"
                )));
            }
        }
        let job = Arc::new(Job {
            record: Mutex::new(JobRecord {
                id: state.fresh_id("job-"),
                session_id: id.clone(),
                kind: "inversion".into(),
                state: JobState::Running,
                progress: 0.0,
                best_loss: None,
                result: None,
                error: None,
            }),
            cancel: Default::default(),
        });
        let job_id = job.snapshot().id;
        state
            .jobs
            .lock()
            .expect("jobs lock")
            .insert(job_id.clone(), Arc::clone(&job));
        s.active_job = Some(job_id);
        (job, ctx.scene)
    };
    let record = job.snapshot();
    let permits = Arc::clone(&state.workers);
    tokio::spawn(async move {
        // Bounded worker pool: wait for a slot before touching the CPU.
        let _permit = permits.acquire_owned().await;
        let (run_job, run_state) = (Arc::clone(&job), state.clone());
        let outcome = tokio::task::spawn_blocking(move || {
            if run_job.cancelled() {
                return Err(CoreError::Cancelled);
            }
            invert_observed(&run_state.generator, &target, &scene, &cfg, &*run_job)
        })
        .await;
        finish(&state, &session, &job, outcome);
    });
    Ok((StatusCode::ACCEPTED, Json(record)))
}

/// Records the outcome of an inversion. On success the recovered style
/// becomes a new slot before the job reports `done`.
fn finish(
    state: &AppState,
    session: &Mutex<Session>,
    job: &Job,
    outcome: Result<styleprobe::Result<InversionResult>, tokio::task::JoinError>,
) {
    let mut s = lock(session);
    s.active_job = None;
    let ended = |state: JobState, error: Option<String>| {
        let mut r = job.record.lock().expect("job lock");
        r.state = state;
        r.error = error;
    };
    let result = match outcome {
        Ok(Ok(_)) | Ok(Err(CoreError::Cancelled)) if job.cancelled() => {
            return ended(JobState::Cancelled, None)
        }
        Ok(Ok(result)) => result,
        Ok(Err(e)) => return ended(JobState::Failed, Some(e.to_string())),
        Err(e) => {
            return ended(
                JobState::Failed,
                Some(format!("inversion worker failed: {e}")),
            )
        }
    };
    let presented = session_context(state, &s).and_then(|ctx| {
        let image = state.generator.synthesize_style(&result.w, &ctx.scene)?;
        state.present(&ctx.model, &image)
    });
    match presented {
        Ok((image, score)) => {
            let slot = s.add_slot("inv", result.w.clone());
            let mut r = job.record.lock().expect("job lock");
            r.progress = 1.0;
            r.best_loss = Some(result.final_loss);
            r.result = Some(InversionOutcome {
                slot,
                style: result.w,
                final_loss: result.final_loss,
                image,
                score,
            });
            r.state = JobState::Done;
        }
        Err(e) => ended(JobState::Failed, Some(e.message)),
    }
}

async fn get_job(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<JobRecord>> {
    Ok(Json(state.job(&id)?.snapshot()))
}

async fn cancel_job(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<JobRecord>> {
    let job = state.job(&id)?;
    job.cancel.store(true, Ordering::SeqCst);
    Ok(Json(job.snapshot()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitRequest {
    model_id: String,
    /// Free-form label stored with the direction.
    attribute: Option<String>,
    n_train: Option<usize>,
    n_val: Option<usize>,
    seed: Option<u64>,
    fit: Option<DirectionFitConfig>,
}

#[derive(Serialize, Deserialize)]
pub struct FitResponse {
    pub direction_id: String,
    pub direction: DirectionModel,
}

async fn fit_direction(
    State(state): State<AppState>,
    req: Body<FitRequest>,
) -> ApiResult<Json<FitResponse>> {
    let req = body(req)?;
    let model = state.model(&req.model_id)?;
    let ctx = context(&state, &model.scenario.clone(), &req.model_id)?;
    let defaults = &state.config.directions;
    let n_train = req.n_train.unwrap_or(defaults.n_train);
    let n_val = req.n_val.unwrap_or(defaults.n_val);
    let seed = req.seed.unwrap_or(defaults.seed);
    let fit = req.fit.unwrap_or_else(|| defaults.fit.clone());
    let attribute = req.attribute.unwrap_or_else(|| "score".into());
    blocking(move || {
        let data = directions::sample_latent_dataset(
            &state.generator,
            &ctx.model,
            &ctx.scene,
            n_train,
            n_val,
            seed,
        )?;
        let direction = directions::fit_direction(&data, &attribute, &ctx.scene.id, &fit)?;
        let direction_id = state.store_direction(direction.clone())?;
        Ok(Json(FitResponse {
            direction_id,
            direction,
        }))
    })
    .await
}

async fn get_direction(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<DirectionModel>> {
    Ok(Json((*state.direction(&id)?).clone()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepRequest {
    slot: String,
    direction_id: String,
    lambdas: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
pub struct SweepEntryView {
    pub lambda: f64,
    pub style: StyleVector,
    pub image: String,
    pub score: f64,
    pub clamped: bool,
}

#[derive(Serialize, Deserialize)]
pub struct SweepResponse {
    /// Ascending in `lambda`.
    pub entries: Vec<SweepEntryView>,
}

async fn sweep(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Body<SweepRequest>,
) -> ApiResult<Json<SweepResponse>> {
    let req = body(req)?;
    let session = state.session(&id)?;
    let direction = state.direction(&req.direction_id)?;
    let lambdas = req
        .lambdas
        .unwrap_or_else(|| state.config.directions.lambdas.clone());
    blocking(move || {
        let (ctx, w) = {
            let s = lock(&session);
            (session_context(&state, &s)?, s.slot(&req.slot)?.clone())
        };
        let result = directions::sweep(
            &state.generator,
            &ctx.model,
            &ctx.scene,
            &w,
            &direction,
            &lambdas,
        )?;
        let entries = result
            .entries
            .into_iter()
            .map(|e| {
                let (image, score) = state.present(&ctx.model, &e.image)?;
                Ok(SweepEntryView {
                    lambda: e.lambda,
                    style: e.style,
                    image,
                    score,
                    clamped: e.clamped,
                })
            })
            .collect::<ApiResult<_>>()?;
        Ok(Json(SweepResponse { entries }))
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct AttributionParamsRequest {
    samples: Option<usize>,
    sigma: Option<f64>,
    seed: Option<u64>,
    steps: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributionRequest {
    model_id: String,
    image: Option<String>,
    session_id: Option<String>,
    slot: Option<String>,
    method: String,
    #[serde(default)]
    params: AttributionParamsRequest,
}

#[derive(Serialize, Deserialize)]
pub struct AttributionResponse {
    pub method: Method,
    pub params: attribution::AttributionParams,
    /// Score of the (decoded) input image.
    pub score: f64,
    /// Score of the all-zeros baseline, for integrated gradients.
    pub baseline_score: Option<f64>,
    pub total: f64,
    pub heatmap: String,
    /// `[row][column][channel]`.
    pub values: Vec<Vec<[f64; 3]>>,
}

async fn attribution(
    State(state): State<AppState>,
    req: Body<AttributionRequest>,
) -> ApiResult<Json<AttributionResponse>> {
    let req = body(req)?;
    let method: Method = req.method.parse().map_err(|e: CoreError| {
        ApiError::new(StatusCode::BAD_REQUEST, "unknown_method", e.to_string())
    })?;
    let model = state.model(&req.model_id)?;
    blocking(move || {
        let image: ImageBuffer = match (&req.image, &req.session_id, &req.slot) {
            (Some(png), None, None) => codec::decode_png_base64(png).map_err(|e| {
                ApiError::new(StatusCode::BAD_REQUEST, "undecodable_image", e.to_string())
            })?,
            (None, Some(sid), Some(slot)) => {
                let session = state.session(sid)?;
                let s = lock(&session);
                let scene = state.scenario(&s.state.scenario)?;
                codec::quantized(&state.generator.synthesize_style(s.slot(slot)?, scene)?)
            }
            _ => {
                return Err(ApiError::bad_request(
                    "give either `image` or both `session_id` and `slot`",
                ))
            }
        };
        let size = model.input_size();
        image.ensure_dims(size, size)?;
        let defaults = &state.config.attribution;
        let p = &req.params;
        let (map, baseline_score): (AttributionMap, Option<f64>) = match method {
            Method::Saliency => (attribution::saliency(&*model, &image)?, None),
            Method::Smoothgrad => (
                attribution::smoothgrad(
                    &*model,
                    &image,
                    p.samples.unwrap_or(defaults.samples),
                    p.sigma.unwrap_or(defaults.sigma),
                    p.seed.unwrap_or(defaults.seed),
                )?,
                None,
            ),
            Method::IntegratedGradients => {
                let baseline = attribution::zeros_like(&image);
                let map = attribution::integrated_gradients(
                    &*model,
                    &image,
                    &baseline,
                    p.steps.unwrap_or(defaults.steps),
                )?;
                (map, Some(model.score(&baseline)?))
            }
        };
        Ok(Json(AttributionResponse {
            method,
            params: map.params.clone(),
            score: model.score(&image)?,
            baseline_score,
            total: map.total(),
            heatmap: codec::encode_png_base64(&attribution::to_heatmap(&map))?,
            values: map.nested(),
        }))
    })
    .await
}
