//! Request and response bodies of the HTTP service, shared by the server and
//! its clients. Experiment requests carry the same `key = value` text as
//! experiment files; dataset paths in it are resolved by the server.

use serde::{Deserialize, Serialize};

use crate::dataset::synth::{SynthDatasetConfig, SynthSpec};
use crate::dataset::{Frame, GestureKind, GestureSample};
use crate::engine::{EngineConfig, SessionOutput, TaskConfig};
use crate::features::{FeatureRow, FeatureSchema, FeatureSet, Timesteps};
use crate::harness::{Evaluation, ProjectionRow, Report, Sweep};
use crate::models::{ModelKind, Prediction, TrainedModel};
use crate::segment::{GaConfig, MotionThresholds, SegmentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// A file the client should write into its output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRequest {
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResponse {
    pub report: Report,
    pub files: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResponse {
    pub sweep: Sweep,
    pub files: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResponse {
    pub rows: Vec<ProjectionRow>,
    pub files: Vec<OutputFile>,
}

/// Train one model family on the training split of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub config: String,
    pub model: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    pub kind: ModelKind,
    pub feature_set: FeatureSet,
    pub schema: FeatureSchema,
    pub classes: Vec<u32>,
}

impl ModelInfo {
    pub fn of(id: impl Into<String>, m: &TrainedModel) -> Self {
        Self {
            id: id.into(),
            kind: m.kind(),
            feature_set: m.feature_set,
            schema: m.schema,
            classes: m.classes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub predictions: Vec<Prediction>,
}

/// Score a stored model on the test split of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub config: String,
}

pub type EvaluateResponse = Evaluation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    #[serde(default)]
    pub sg_model: Option<String>,
    #[serde(default)]
    pub dg_model: Option<String>,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub thresholds: MotionThresholds,
    #[serde(default)]
    pub task: TaskConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub frames_seen: usize,
    pub in_motion: bool,
    pub finished: bool,
}

/// A batch of frames. With `motion`, each frame carries an external motion
/// bit and the session's own detector is bypassed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesRequest {
    pub frames: Vec<Frame>,
    #[serde(default)]
    pub motion: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesResponse {
    pub output: SessionOutput,
    pub session: SessionInfo,
    /// Engine time per frame in this batch, milliseconds.
    pub frame_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub frames: Vec<Frame>,
    #[serde(default)]
    pub thresholds: MotionThresholds,
    #[serde(default)]
    pub segment: SegmentConfig,
    /// Use this mask instead of running the detector.
    #[serde(default)]
    pub mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub kind: GestureKind,
    pub start: usize,
    pub len: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub mask: Vec<bool>,
    pub segments: Vec<SegmentSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub frames: Vec<Frame>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateRequest {
    pub streams: Vec<LabeledStream>,
    #[serde(default)]
    pub ga: GaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesRequest {
    pub feature_set: FeatureSet,
    pub frames: Vec<Frame>,
    /// Prefix length for dynamic sets; the whole sample when absent.
    #[serde(default)]
    pub j: Option<usize>,
}

/// Feature rows of labelled samples; `steps` as in training extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowsRequest {
    pub feature_set: FeatureSet,
    pub samples: Vec<GestureSample>,
    pub steps: Timesteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowsResponse {
    pub rows: Vec<FeatureRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStreamRequest {
    pub spec: SynthSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDatasetRequest {
    #[serde(default)]
    pub config: SynthDatasetConfig,
    #[serde(default)]
    pub seed: u64,
}
