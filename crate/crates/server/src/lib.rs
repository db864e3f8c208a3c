//! HTTP/JSON service over the gesture pipeline: model registry, streaming
//! sessions, segmentation and feature utilities, and the experiment harness.
//!
//! CPU-heavy handlers run on the blocking pool so frame ingestion stays
//! responsive while a model trains.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use gesture_core::api::*;
use gesture_core::config::KvConfig;
use gesture_core::dataset::synth::{synth_dataset, synth_stream, SynthStream};
use gesture_core::dataset::{GestureSample, Stream};
use gesture_core::engine::{Engine, Session, SessionOutput};
use gesture_core::features::{
    dg_features, dg_features_at, extract_rows, local_rows, sg_vector, FeatureSet, FeatureVector,
};
use gesture_core::harness::{
    prepare, run_experiment, run_projection, run_sweep, score_model, train_selected, write_projection_csv,
    ExperimentConfig,
};
use gesture_core::models::TrainedModel;
use gesture_core::segment::{calibrate_thresholds, extract_segments, motion_mask, CalibrationReport, MotionMask};

pub use error::ApiError;

/// Request bodies carry whole streams and datasets.
pub const BODY_LIMIT: usize = 512 * 1024 * 1024;

type ApiResult<T> = Result<Json<T>, ApiError>;

struct SessionSlot {
    session: Session,
    finished: bool,
}

impl SessionSlot {
    fn info(&self, id: &str) -> SessionInfo {
        SessionInfo {
            id: id.to_string(),
            frames_seen: self.session.engine.frames_seen(),
            in_motion: self.session.engine.in_motion(),
            finished: self.finished,
        }
    }
}

#[derive(Default)]
pub struct AppState {
    models: RwLock<HashMap<String, Arc<TrainedModel>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionSlot>>>>,
}

pub type SharedState = Arc<AppState>;

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

fn experiment(text: &str) -> Result<ExperimentConfig, ApiError> {
    let mut config = ExperimentConfig::from_kv(&KvConfig::parse(text)?)?;
    // Outputs go back to the client, which decides where to write them.
    config.output = None;
    Ok(config)
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await?
}

impl AppState {
    fn model(&self, id: &str) -> Result<Arc<TrainedModel>, ApiError> {
        self.models
            .read()
            .expect("model registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("model", id))
    }

    fn insert_model(&self, model: TrainedModel) -> ModelInfo {
        let id = new_id();
        let info = ModelInfo::of(&id, &model);
        self.models.write().expect("model registry lock").insert(id, Arc::new(model));
        info
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionSlot>>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn train(State(state): State<SharedState>, Json(req): Json<TrainRequest>) -> Result<(StatusCode, Json<ModelInfo>), ApiError> {
    let config = experiment(&req.config)?;
    let model = blocking(move || {
        let prepared = prepare(&config)?;
        let (model, _) = train_selected(&config, req.model, &prepared)?;
        Ok(model)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(state.insert_model(model))))
}

/// Takes the model file as the raw body so the versioned reader applies.
async fn import_model(State(state): State<SharedState>, body: String) -> Result<(StatusCode, Json<ModelInfo>), ApiError> {
    let model = TrainedModel::from_json(&body)?;
    Ok((StatusCode::CREATED, Json(state.insert_model(model))))
}

async fn list_models(State(state): State<SharedState>) -> Json<Vec<ModelInfo>> {
    let models = state.models.read().expect("model registry lock");
    let mut out: Vec<ModelInfo> = models.iter().map(|(id, m)| ModelInfo::of(id, m)).collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_model(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<TrainedModel> {
    Ok(Json(state.model(&id)?.as_ref().clone()))
}

async fn delete_model(State(state): State<SharedState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.models.write().expect("model registry lock").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found("model", &id)),
    }
}

async fn predict(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Json(req): Json<PredictRequest>,
) -> ApiResult<PredictResponse> {
    let model = state.model(&id)?;
    let predictions = blocking(move || Ok(model.predict_batch(&req.rows)?)).await?;
    Ok(Json(PredictResponse { predictions }))
}

async fn evaluate(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Json(req): Json<EvaluateRequest>,
) -> ApiResult<EvaluateResponse> {
    let model = state.model(&id)?;
    let config = experiment(&req.config)?;
    let scores = blocking(move || {
        let prepared = prepare(&config)?;
        Ok(score_model(&config, &model, &prepared)?)
    })
    .await?;
    Ok(Json(scores))
}

async fn create_session(
    State(state): State<SharedState>,
    Json(req): Json<SessionRequest>,
) -> Result<(StatusCode, Json<SessionInfo>), ApiError> {
    let sg = req.sg_model.as_deref().map(|id| state.model(id)).transpose()?;
    let dg = req.dg_model.as_deref().map(|id| state.model(id)).transpose()?;
    let engine = Engine::new(req.engine, req.thresholds, sg, dg)?;
    let slot = SessionSlot {
        session: Session::new(engine, req.task),
        finished: false,
    };
    let id = new_id();
    let info = slot.info(&id);
    state
        .sessions
        .write()
        .expect("session table lock")
        .insert(id, Arc::new(Mutex::new(slot)));
    Ok((StatusCode::CREATED, Json(info)))
}

async fn get_session(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<SessionInfo> {
    let slot = state.session(&id)?;
    let info = slot.lock().expect("session lock").info(&id);
    Ok(Json(info))
}

async fn push_frames(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Json(req): Json<FramesRequest>,
) -> ApiResult<FramesResponse> {
    if let Some(m) = &req.motion {
        if m.len() != req.frames.len() {
            return Err(ApiError::bad_request(format!(
                "{} motion bits for {} frames",
                m.len(),
                req.frames.len()
            )));
        }
    }
    let slot = state.session(&id)?;
    let resp = blocking(move || {
        let mut slot = slot.lock().expect("session lock");
        let mut output = SessionOutput::default();
        let mut frame_ms = Vec::with_capacity(req.frames.len());
        for (i, frame) in req.frames.into_iter().enumerate() {
            let started = Instant::now();
            let out = match &req.motion {
                Some(bits) => slot.session.push_frame_with_motion(frame, bits[i])?,
                None => slot.session.push_frame(frame)?,
            };
            frame_ms.push(started.elapsed().as_secs_f64() * 1e3);
            output.events.extend(out.events);
            output.commands.extend(out.commands);
        }
        Ok(FramesResponse {
            output,
            session: slot.info(&id),
            frame_ms,
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn finish_session(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<FramesResponse> {
    let slot = state.session(&id)?;
    let resp = blocking(move || {
        let mut slot = slot.lock().expect("session lock");
        let started = Instant::now();
        let output = slot.session.finish()?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        slot.finished = true;
        Ok(FramesResponse {
            output,
            session: slot.info(&id),
            frame_ms: vec![ms],
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn delete_session(State(state): State<SharedState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().expect("session table lock").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found("session", &id)),
    }
}

async fn segment(Json(req): Json<SegmentRequest>) -> ApiResult<SegmentResponse> {
    let resp = blocking(move || {
        let stream = Stream::new(req.frames).map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let mask = match req.mask {
            Some(bits) => MotionMask(bits),
            None => motion_mask(&stream, &req.thresholds)?,
        };
        let segments = extract_segments(&stream, &mask, req.segment)?
            .iter()
            .map(|s| SegmentSpan {
                kind: s.kind,
                start: s.start,
                len: s.len,
                complete: s.complete,
            })
            .collect();
        Ok(SegmentResponse { mask: mask.0, segments })
    })
    .await?;
    Ok(Json(resp))
}

async fn calibrate(Json(req): Json<CalibrateRequest>) -> ApiResult<CalibrationReport> {
    let report = blocking(move || {
        let data = req
            .streams
            .into_iter()
            .map(|s| {
                Stream::new(s.frames)
                    .map(|st| (st, s.mask))
                    .map_err(|e| ApiError::unprocessable(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(calibrate_thresholds(&data, &req.ga)?)
    })
    .await?;
    Ok(Json(report))
}

async fn features(Json(req): Json<FeaturesRequest>) -> ApiResult<FeatureVector> {
    let fv = blocking(move || {
        if req.frames.is_empty() {
            return Err(ApiError::bad_request("no frames"));
        }
        Ok(match (req.feature_set, req.j) {
            (FeatureSet::Sg23, _) => sg_vector(req.frames.last().expect("non-empty")),
            (set, None) => dg_features(set, &req.frames)?,
            (set, Some(j)) => dg_features_at(set, &local_rows(&req.frames), j)?,
        })
    })
    .await?;
    Ok(Json(fv))
}

async fn feature_rows(Json(req): Json<RowsRequest>) -> ApiResult<RowsResponse> {
    let rows = blocking(move || {
        let refs: Vec<&GestureSample> = req.samples.iter().collect();
        Ok(extract_rows(req.feature_set, &refs, req.steps)?)
    })
    .await?;
    Ok(Json(RowsResponse { rows }))
}

async fn synth_stream_handler(Json(req): Json<SynthStreamRequest>) -> ApiResult<SynthStream> {
    let s = blocking(move || synth_stream(&req.spec, req.seed).map_err(|e| ApiError::unprocessable(e.to_string()))).await?;
    Ok(Json(s))
}

async fn synth_dataset_handler(Json(req): Json<SynthDatasetRequest>) -> ApiResult<Vec<GestureSample>> {
    let s = blocking(move || Ok(synth_dataset(&req.config, req.seed))).await?;
    Ok(Json(s))
}

async fn harness_run(Json(req): Json<ExperimentRequest>) -> ApiResult<ExperimentResponse> {
    let config = experiment(&req.config)?;
    let report = blocking(move || Ok(run_experiment(&config)?)).await?;
    let files = report
        .artifacts()
        .into_iter()
        .map(|(name, body)| OutputFile::new(name, body))
        .collect();
    Ok(Json(ExperimentResponse { report, files }))
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<String, ApiError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| ApiError::internal(e.to_string()))
}

async fn harness_sweep(Json(req): Json<ExperimentRequest>) -> ApiResult<SweepResponse> {
    let config = experiment(&req.config)?;
    let sweep = blocking(move || Ok(run_sweep(&config)?)).await?;
    let files = vec![
        OutputFile::new("sweep.csv", csv_text(|w| sweep.write_csv(w))?),
        OutputFile::new("scores.csv", csv_text(|w| sweep.write_scores_csv(w))?),
    ];
    Ok(Json(SweepResponse { sweep, files }))
}

async fn harness_project(Json(req): Json<ExperimentRequest>) -> ApiResult<ProjectionResponse> {
    let config = experiment(&req.config)?;
    let rows = blocking(move || Ok(run_projection(&config)?)).await?;
    let files = vec![OutputFile::new("projection.csv", csv_text(|w| write_projection_csv(&rows, w))?)];
    Ok(Json(ProjectionResponse { rows, files }))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/v1/models", post(train).get(list_models))
        .route("/v1/models/import", post(import_model))
        .route("/v1/models/{id}", get(get_model).delete(delete_model))
        .route("/v1/models/{id}/predict", post(predict))
        .route("/v1/models/{id}/evaluate", post(evaluate))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/frames", post(push_frames))
        .route("/v1/sessions/{id}/finish", post(finish_session))
        .route("/v1/segment", post(segment))
        .route("/v1/calibrate", post(calibrate))
        .route("/v1/features", post(features))
        .route("/v1/features/rows", post(feature_rows))
        .route("/v1/synth/stream", post(synth_stream_handler))
        .route("/v1/synth/dataset", post(synth_dataset_handler))
        .route("/v1/harness/run", post(harness_run))
        .route("/v1/harness/sweep", post(harness_sweep))
        .route("/v1/harness/project", post(harness_project))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, state: SharedState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves in a background task. Returns the bound address,
/// which differs from `addr` when its port is 0.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(serve(listener, SharedState::default()));
    Ok((local, handle))
}
