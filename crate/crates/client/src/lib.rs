//! Thin async client for the gesture service. One method per endpoint; the
//! bodies are the shared types from `gesture_core::api`.

use gesture_core::api::*;
use gesture_core::dataset::synth::SynthStream;
use gesture_core::dataset::GestureSample;
use gesture_core::features::FeatureVector;
use gesture_core::models::{ModelKind, TrainedModel};
use gesture_core::segment::CalibrationReport;
use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server returned {status}: {message}")]
    Api { status: StatusCode, message: String },
    #[error("bad model file: {0}")]
    Model(#[from] gesture_core::models::ModelError),
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8750`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{}", self.base, path))
    }

    async fn send(&self, req: RequestBuilder) -> Result<reqwest::Response> {
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|e| e.error).unwrap_or(text);
        Err(ClientError::Api { status, message })
    }

    async fn json<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T> {
        Ok(self.send(req).await?.json().await?)
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.json(self.request(Method::POST, path).json(body)).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.json(self.request(Method::GET, path)).await
    }

    async fn delete(&self, path: &str) -> Result<()> {
        self.send(self.request(Method::DELETE, path)).await.map(|_| ())
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/healthz").await
    }

    pub async fn train(&self, config: &str, model: ModelKind) -> Result<ModelInfo> {
        let body = TrainRequest {
            config: config.to_string(),
            model,
        };
        self.post("/v1/models", &body).await
    }

    /// Registers a model from its JSON file contents.
    pub async fn import_model_json(&self, json: String) -> Result<ModelInfo> {
        let req = self
            .request(Method::POST, "/v1/models/import")
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(json);
        self.json(req).await
    }

    pub async fn import_model(&self, model: &TrainedModel) -> Result<ModelInfo> {
        self.import_model_json(model.to_json()?).await
    }

    pub async fn models(&self) -> Result<Vec<ModelInfo>> {
        self.get("/v1/models").await
    }

    pub async fn model(&self, id: &str) -> Result<TrainedModel> {
        let text = self.send(self.request(Method::GET, &format!("/v1/models/{id}"))).await?.text().await?;
        Ok(TrainedModel::from_json(&text)?)
    }

    pub async fn delete_model(&self, id: &str) -> Result<()> {
        self.delete(&format!("/v1/models/{id}")).await
    }

    pub async fn predict(&self, id: &str, rows: Vec<Vec<f64>>) -> Result<PredictResponse> {
        self.post(&format!("/v1/models/{id}/predict"), &PredictRequest { rows }).await
    }

    pub async fn evaluate(&self, id: &str, config: &str) -> Result<EvaluateResponse> {
        let body = EvaluateRequest {
            config: config.to_string(),
        };
        self.post(&format!("/v1/models/{id}/evaluate"), &body).await
    }

    pub async fn create_session(&self, req: &SessionRequest) -> Result<SessionInfo> {
        self.post("/v1/sessions", req).await
    }

    pub async fn session(&self, id: &str) -> Result<SessionInfo> {
        self.get(&format!("/v1/sessions/{id}")).await
    }

    pub async fn push_frames(&self, id: &str, req: &FramesRequest) -> Result<FramesResponse> {
        self.post(&format!("/v1/sessions/{id}/frames"), req).await
    }

    pub async fn finish_session(&self, id: &str) -> Result<FramesResponse> {
        self.json(self.request(Method::POST, &format!("/v1/sessions/{id}/finish"))).await
    }

    pub async fn delete_session(&self, id: &str) -> Result<()> {
        self.delete(&format!("/v1/sessions/{id}")).await
    }

    pub async fn segment(&self, req: &SegmentRequest) -> Result<SegmentResponse> {
        self.post("/v1/segment", req).await
    }

    pub async fn calibrate(&self, req: &CalibrateRequest) -> Result<CalibrationReport> {
        self.post("/v1/calibrate", req).await
    }

    pub async fn features(&self, req: &FeaturesRequest) -> Result<FeatureVector> {
        self.post("/v1/features", req).await
    }

    pub async fn feature_rows(&self, req: &RowsRequest) -> Result<RowsResponse> {
        self.post("/v1/features/rows", req).await
    }

    pub async fn synth_stream(&self, req: &SynthStreamRequest) -> Result<SynthStream> {
        self.post("/v1/synth/stream", req).await
    }

    pub async fn synth_dataset(&self, req: &SynthDatasetRequest) -> Result<Vec<GestureSample>> {
        self.post("/v1/synth/dataset", req).await
    }

    pub async fn run_experiment(&self, config: &str) -> Result<ExperimentResponse> {
        self.post("/v1/harness/run", &experiment(config)).await
    }

    pub async fn sweep(&self, config: &str) -> Result<SweepResponse> {
        self.post("/v1/harness/sweep", &experiment(config)).await
    }

    pub async fn project(&self, config: &str) -> Result<ProjectionResponse> {
        self.post("/v1/harness/project", &experiment(config)).await
    }
}

fn experiment(config: &str) -> ExperimentRequest {
    ExperimentRequest {
        config: config.to_string(),
    }
}
