//! Online frame-by-frame recognition.

mod csvio;
mod taskman;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Frame, GestureKind, Stream};
use crate::features::{
    dg_features, local_rows, pv_at, sg_vector, FeatureSchema, FeatureSet, FeatureVector,
};
use crate::models::{argmax, ModelError, TrainedModel};
use crate::segment::{
    extract_segments, motion_mask, MotionDetector, MotionThresholds, Segment, SegmentConfig,
    SegmentError, SegmentEvent, SegmentTracker,
};

pub use csvio::{read_events_csv, write_commands_csv, write_events_csv};
pub use taskman::{
    CommandMap, CommandRecord, Mode, RobotCommand, RobotLog, Session, SessionOutput, TaskConfig,
    TaskManager,
};

pub const DEFAULT_TAU_S: f64 = 0.696;
pub const DEFAULT_TAU_D: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("frame {index} rejected: {reason}")]
    InvalidFrame { index: usize, reason: String },
    #[error("gate thresholds must lie in [0, 1], got tau_s={tau_s}, tau_d={tau_d}")]
    Gate { tau_s: f64, tau_d: f64 },
    #[error("{role} model has schema {schema}, which cannot be used there")]
    ModelSchema { role: &'static str, schema: FeatureSchema },
    #[error("cannot mix detector-labelled and externally labelled frames in one stream")]
    MixedMotionSource,
    #[error("engine already finished")]
    Finished,
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("feature extraction: {0}")]
    Feature(#[from] crate::features::FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub tau_s: f64,
    pub tau_d: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            tau_s: DEFAULT_TAU_S,
            tau_d: DEFAULT_TAU_D,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let ok = |t: f64| (0.0..=1.0).contains(&t);
        if ok(self.tau_s) && ok(self.tau_d) {
            Ok(())
        } else {
            Err(EngineError::Gate {
                tau_s: self.tau_s,
                tau_d: self.tau_d,
            })
        }
    }

    pub fn tau(&self, kind: GestureKind) -> f64 {
        match kind {
            GestureKind::Static => self.tau_s,
            GestureKind::Dynamic => self.tau_d,
        }
    }
}

/// Index of the winning class, or `None` when the top probability is below
/// the kind's threshold or the motion bit does not fit the kind (static
/// needs `moving == false`, dynamic needs `moving == true`).
pub fn gate(dist: &[f64], kind: GestureKind, config: &GateConfig, moving: bool) -> Option<usize> {
    if dist.is_empty() || moving != (kind == GestureKind::Dynamic) {
        return None;
    }
    let k = argmax(dist);
    (dist[k] >= config.tau(kind)).then_some(k)
}

/// A gated classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    /// Stream index of the frame the classification refers to.
    pub index: usize,
    pub kind: GestureKind,
    pub class_id: u32,
    pub score: f64,
    pub completion: f64,
    pub provisional: bool,
    /// First frame of the motion run this event belongs to.
    pub segment_start: usize,
}

/// Every classification the engine made, gated or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub index: usize,
    pub kind: GestureKind,
    pub segment_start: usize,
    /// Frames used, counted from the segment start.
    pub j: usize,
    pub best_class: u32,
    pub score: f64,
    /// `None` when the gate rejected the classification.
    pub emitted: Option<u32>,
    pub completion: f64,
    pub provisional: bool,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub gate: GateConfig,
    pub segment: SegmentConfig,
    /// Provisional DG classification every this many frames; 0 disables.
    pub provisional_every: usize,
    /// Fallback gesture length (frames) for completion estimates when the
    /// model carries no per-class lengths.
    pub expected_dg_len: f64,
    /// Keep a [`Decision`] for every classification.
    pub record_decisions: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            gate: GateConfig::default(),
            segment: SegmentConfig::default(),
            provisional_every: 1,
            expected_dg_len: 100.0,
            record_decisions: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MotionSource {
    Unset,
    Detector,
    External,
}

/// One engine per stream.
pub struct Engine {
    config: EngineConfig,
    sg: Option<Arc<TrainedModel>>,
    dg: Option<Arc<TrainedModel>>,
    detector: MotionDetector,
    tracker: SegmentTracker,
    /// Frames waiting for their motion label.
    pending: VecDeque<(usize, Frame)>,
    next_index: usize,
    last_t: Option<f64>,
    source: MotionSource,
    finished: bool,
    decisions: Vec<Decision>,
    frames_in_motion: usize,
}

fn check_model(role: &'static str, m: &TrainedModel, dynamic: bool) -> Result<(), EngineError> {
    let fits = if dynamic {
        m.feature_set.is_dynamic()
    } else {
        m.schema == FeatureSchema::Sg23
    };
    if fits {
        Ok(())
    } else {
        Err(EngineError::ModelSchema {
            role,
            schema: m.schema,
        })
    }
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        thresholds: MotionThresholds,
        sg: Option<Arc<TrainedModel>>,
        dg: Option<Arc<TrainedModel>>,
    ) -> Result<Self, EngineError> {
        config.gate.validate()?;
        if let Some(m) = &sg {
            check_model("SG", m, false)?;
        }
        if let Some(m) = &dg {
            check_model("DG", m, true)?;
        }
        Ok(Self {
            detector: MotionDetector::new(thresholds)?,
            tracker: SegmentTracker::new(config.segment),
            config,
            sg,
            dg,
            pending: VecDeque::new(),
            next_index: 0,
            last_t: None,
            source: MotionSource::Unset,
            finished: false,
            decisions: Vec::new(),
            frames_in_motion: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn frames_seen(&self) -> usize {
        self.next_index
    }

    /// Whether the tracker currently considers the hand moving.
    pub fn in_motion(&self) -> bool {
        self.tracker.in_motion()
    }

    pub fn frames_in_motion(&self) -> usize {
        self.frames_in_motion
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn take_decisions(&mut self) -> Vec<Decision> {
        std::mem::take(&mut self.decisions)
    }

    fn admit(&mut self, frame: &Frame, source: MotionSource) -> Result<usize, EngineError> {
        if self.finished {
            return Err(EngineError::Finished);
        }
        let index = self.next_index;
        if let Err(reason) = frame.validate() {
            tracing::warn!(index, %reason, "frame rejected");
            return Err(EngineError::InvalidFrame { index, reason });
        }
        if let Some(t) = self.last_t {
            if !(frame.t > t) {
                let reason = format!("timestamp {} does not follow {}", frame.t, t);
                tracing::warn!(index, %reason, "frame rejected");
                return Err(EngineError::InvalidFrame { index, reason });
            }
        }
        match (self.source, source) {
            (MotionSource::Unset, s) => self.source = s,
            (a, b) if a == b => {}
            _ => return Err(EngineError::MixedMotionSource),
        }
        self.last_t = Some(frame.t);
        self.next_index += 1;
        Ok(index)
    }

    /// Feeds one frame; motion is detected internally. Events come out once
    /// the frame's motion label is final, a few frames later.
    pub fn push_frame(&mut self, frame: Frame) -> Result<Vec<GestureEvent>, EngineError> {
        let index = self.admit(&frame, MotionSource::Detector)?;
        self.pending.push_back((index, frame));
        let labels = self.detector.push(&frame);
        self.consume_labels(labels)
    }

    /// Feeds one frame with an externally supplied motion bit.
    pub fn push_frame_with_motion(&mut self, frame: Frame, moving: bool) -> Result<Vec<GestureEvent>, EngineError> {
        self.admit(&frame, MotionSource::External)?;
        let events = self.tracker.push(frame, moving);
        self.handle(events)
    }

    /// Flushes the detector and closes any open run.
    pub fn finish(&mut self) -> Result<Vec<GestureEvent>, EngineError> {
        if self.finished {
            return Ok(Vec::new());
        }
        self.finished = true;
        let mut out = Vec::new();
        if self.source == MotionSource::Detector {
            let labels = self.detector.finish();
            out.extend(self.consume_labels(labels)?);
        }
        let events = self.tracker.finish();
        out.extend(self.handle(events)?);
        Ok(out)
    }

    fn consume_labels(&mut self, labels: Vec<(usize, bool)>) -> Result<Vec<GestureEvent>, EngineError> {
        let mut out = Vec::new();
        for (index, bit) in labels {
            let (i, frame) = self.pending.pop_front().expect("label for a pending frame");
            debug_assert_eq!(i, index);
            let events = self.tracker.push(frame, bit);
            out.extend(self.handle(events)?);
        }
        Ok(out)
    }

    fn handle(&mut self, events: Vec<SegmentEvent>) -> Result<Vec<GestureEvent>, EngineError> {
        let mut out = Vec::new();
        for e in events {
            match e {
                SegmentEvent::Progress { start, index, j } => {
                    self.frames_in_motion += 1;
                    if let Some(ev) = self.provisional(start, index, j)? {
                        out.push(ev);
                    }
                }
                SegmentEvent::Closed {
                    dynamic,
                    static_frame,
                } => {
                    if let Some(ev) = self.classify_dynamic(&dynamic)? {
                        out.push(ev);
                    }
                    if let Some(s) = static_frame {
                        if let Some(ev) = self.classify_static(&s, dynamic.start)? {
                            out.push(ev);
                        }
                    }
                }
                SegmentEvent::Discarded { start, len } => {
                    tracing::debug!(start, len, "short motion run discarded");
                }
            }
        }
        Ok(out)
    }

    fn provisional(&mut self, start: usize, index: usize, j: usize) -> Result<Option<GestureEvent>, EngineError> {
        let every = self.config.provisional_every;
        let Some(model) = self.dg.clone() else {
            return Ok(None);
        };
        if every == 0 || j < 2 || !j.is_multiple_of(every) || model.schema != FeatureSchema::Pv28 {
            return Ok(None);
        }
        let (_, frames) = self.tracker.open_frames().expect("progress implies an open run");
        let local = local_rows(&frames[..j]);
        let mut features = pv_at(&local, j)?;
        let proba = model.predict_proba(&features)?;
        let k = argmax(&proba);
        let expected = model
            .class_lengths
            .get(k)
            .copied()
            .filter(|l| *l > 0.0)
            .unwrap_or(self.config.expected_dg_len);
        let completion = (j as f64 / expected).min(1.0);
        features.completion = Some(completion);
        Ok(self.decide(&model, proba, GestureKind::Dynamic, index, start, j, completion, true, features))
    }

    fn classify_dynamic(&mut self, seg: &Segment) -> Result<Option<GestureEvent>, EngineError> {
        let Some(model) = self.dg.clone() else {
            return Ok(None);
        };
        if seg.frames.len() < 2 {
            return Ok(None);
        }
        let features = dynamic_features(model.feature_set, seg)?;
        let proba = model.predict_proba(&features)?;
        Ok(self.decide(
            &model,
            proba,
            GestureKind::Dynamic,
            seg.end() - 1,
            seg.start,
            seg.len,
            1.0,
            false,
            features,
        ))
    }

    fn classify_static(&mut self, seg: &Segment, run_start: usize) -> Result<Option<GestureEvent>, EngineError> {
        let Some(model) = self.sg.clone() else {
            return Ok(None);
        };
        let features = sg_vector(&seg.frames[0]);
        let proba = model.predict_proba(&features)?;
        Ok(self.decide(&model, proba, GestureKind::Static, seg.start, run_start, 1, 1.0, false, features))
    }

    #[allow(clippy::too_many_arguments)]
    fn decide(
        &mut self,
        model: &TrainedModel,
        proba: Vec<f64>,
        kind: GestureKind,
        index: usize,
        segment_start: usize,
        j: usize,
        completion: f64,
        provisional: bool,
        features: FeatureVector,
    ) -> Option<GestureEvent> {
        let moving = kind == GestureKind::Dynamic;
        let gated = gate(&proba, kind, &self.config.gate, moving);
        let k = argmax(&proba);
        let class_id = model.classes[k];
        if self.config.record_decisions {
            self.decisions.push(Decision {
                index,
                kind,
                segment_start,
                j,
                best_class: class_id,
                score: proba[k],
                emitted: gated.map(|g| model.classes[g]),
                completion,
                provisional,
                features,
            });
        }
        gated.map(|g| GestureEvent {
            index,
            kind,
            class_id: model.classes[g],
            score: proba[g],
            completion,
            provisional,
            segment_start,
        })
    }
}

/// Full-length features of a closed DG candidate.
pub fn dynamic_features(set: FeatureSet, seg: &Segment) -> Result<FeatureVector, EngineError> {
    Ok(dg_features(set, &seg.frames)?)
}

/// Offline counterpart of the engine: mask, segments, features, predict.
/// Returns one decision per final DG classification and per SG candidate.
pub fn batch_decisions(
    stream: &Stream,
    thresholds: &MotionThresholds,
    config: &EngineConfig,
    sg: Option<&TrainedModel>,
    dg: Option<&TrainedModel>,
) -> Result<Vec<Decision>, EngineError> {
    let mask = motion_mask(stream, thresholds)?;
    batch_decisions_with_mask(stream, mask.bits(), config, sg, dg)
}

pub fn batch_decisions_with_mask(
    stream: &Stream,
    bits: &[bool],
    config: &EngineConfig,
    sg: Option<&TrainedModel>,
    dg: Option<&TrainedModel>,
) -> Result<Vec<Decision>, EngineError> {
    let mask = crate::segment::MotionMask(bits.to_vec());
    let segments = extract_segments(stream, &mask, config.segment)?;
    let mut out = Vec::new();
    let mut last_dg_start = 0;
    for seg in &segments {
        let (model, features, j, index, start) = match seg.kind {
            GestureKind::Dynamic => {
                last_dg_start = seg.start;
                let Some(m) = dg else { continue };
                if seg.frames.len() < 2 {
                    continue;
                }
                (m, dynamic_features(m.feature_set, seg)?, seg.len, seg.end() - 1, seg.start)
            }
            GestureKind::Static => {
                let Some(m) = sg else { continue };
                (m, sg_vector(&seg.frames[0]), 1, seg.start, last_dg_start)
            }
        };
        let proba = model.predict_proba(&features)?;
        let k = argmax(&proba);
        let gated = gate(&proba, seg.kind, &config.gate, seg.kind == GestureKind::Dynamic);
        out.push(Decision {
            index,
            kind: seg.kind,
            segment_start: start,
            j,
            best_class: model.classes[k],
            score: proba[k],
            emitted: gated.map(|g| model.classes[g]),
            completion: 1.0,
            provisional: false,
            features,
        });
    }
    Ok(out)
}

/// Pushes a whole stream through an engine, including the final flush.
pub fn replay(engine: &mut Engine, stream: &Stream) -> Result<Vec<GestureEvent>, EngineError> {
    let mut out = Vec::new();
    for f in &stream.frames {
        out.extend(engine.push_frame(*f)?);
    }
    out.extend(engine.finish()?);
    Ok(out)
}
