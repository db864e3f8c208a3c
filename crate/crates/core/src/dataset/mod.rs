//! Sensor frames, streams and labelled gesture samples, plus ingestion,
//! glove/tracker fusion, split protocol and synthetic fixtures.

mod fuse;
mod io;
mod split;
pub mod synth;

pub use fuse::{fuse_streams, FuseReport, GloveReading, TrackerReading, MAX_TRACKER_GAP};
pub use io::{load_dataset, write_dataset, write_sample_csv, read_sample_csv, ManifestRow};
pub use split::{split_dataset, DatasetSplits, SplitRatios};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// 22 glove bend channels followed by 6 tracker pose channels.
pub const CHANNELS: usize = 28;
pub const GLOVE_CHANNELS: usize = 22;

/// Tracker channel indices within a frame (`l1..l6`).
pub const L1: usize = 22;
pub const L2: usize = 23;
pub const L3: usize = 24;
/// Roll (`l4`), degrees.
pub const ROLL: usize = 25;
/// Pitch (`l5`), degrees.
pub const PITCH: usize = 26;
/// Yaw (`l6`), degrees.
pub const YAW: usize = 27;

pub const NOMINAL_RATE_HZ: f64 = 100.0;

/// Observed DG length range in the recorded dataset.
pub const DG_LENGTH_RANGE: (usize, usize) = (20, 224);

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no manifest.csv in {0}")]
    NoManifest(String),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: expected {expected} channels, found {found}")]
    Schema {
        file: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid frame at {index}: {reason}")]
    InvalidFrame { index: usize, reason: String },
    #[error("invalid sample {sample}: {reason}")]
    InvalidSample { sample: String, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("split ratios must be non-negative and sum to 1 (got {0:?})")]
    BadRatios([f64; 3]),
    #[error("holdout user {0} has no samples")]
    UnknownHoldout(u32),
    #[error("synthetic spec: {0}")]
    Synth(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One fused 28-channel sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Seconds.
    pub t: f64,
    pub channels: [f64; CHANNELS],
}

impl Frame {
    pub fn new(t: f64, channels: [f64; CHANNELS]) -> Self {
        Self { t, channels }
    }

    pub fn zeros(t: f64) -> Self {
        Self {
            t,
            channels: [0.0; CHANNELS],
        }
    }

    pub fn glove(&self) -> &[f64] {
        &self.channels[..GLOVE_CHANNELS]
    }

    pub fn position(&self) -> [f64; 3] {
        [self.channels[L1], self.channels[L2], self.channels[L3]]
    }

    pub fn set_position(&mut self, p: [f64; 3]) {
        self.channels[L1] = p[0];
        self.channels[L2] = p[1];
        self.channels[L3] = p[2];
    }

    pub fn roll(&self) -> f64 {
        self.channels[ROLL]
    }

    pub fn pitch(&self) -> f64 {
        self.channels[PITCH]
    }

    pub fn yaw(&self) -> f64 {
        self.channels[YAW]
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.t.is_finite() {
            return Err(format!("timestamp {} is not finite", self.t));
        }
        if let Some((i, v)) = self
            .channels
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(format!("channel {} is not finite ({v})", i + 1));
        }
        for (name, idx) in [("l4", ROLL), ("l5", PITCH), ("l6", YAW)] {
            let v = self.channels[idx];
            if !(-180.0..=180.0).contains(&v) {
                return Err(format!("{name} = {v} outside [-180, 180]"));
            }
        }
        Ok(())
    }
}

/// Timestamped frame sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub frames: Vec<Frame>,
    pub nominal_rate: f64,
}

impl Stream {
    pub fn new(frames: Vec<Frame>) -> Result<Self, DatasetError> {
        let stream = Self {
            frames,
            nominal_rate: NOMINAL_RATE_HZ,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.frames.is_empty() {
            return Err(DatasetError::Empty("stream has no frames"));
        }
        for (i, f) in self.frames.iter().enumerate() {
            f.validate()
                .map_err(|reason| DatasetError::InvalidFrame { index: i, reason })?;
            if i > 0 && f.t <= self.frames[i - 1].t {
                return Err(DatasetError::InvalidFrame {
                    index: i,
                    reason: format!(
                        "timestamp {} not after previous {}",
                        f.t,
                        self.frames[i - 1].t
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureKind {
    #[serde(rename = "S")]
    Static,
    #[serde(rename = "D")]
    Dynamic,
}

impl GestureKind {
    pub fn code(self) -> &'static str {
        match self {
            GestureKind::Static => "S",
            GestureKind::Dynamic => "D",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "S" | "s" | "SG" | "static" => Some(GestureKind::Static),
            "D" | "d" | "DG" | "dynamic" => Some(GestureKind::Dynamic),
            _ => None,
        }
    }
}

impl fmt::Display for GestureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GestureKind::Static => "SG",
            GestureKind::Dynamic => "DG",
        })
    }
}

/// A labelled gesture: one frame for SG, a frame sequence for DG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureSample {
    pub sample_id: String,
    pub kind: GestureKind,
    pub class_id: u32,
    pub user_id: u32,
    pub session_id: u32,
    pub frames: Vec<Frame>,
}

impl GestureSample {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |reason: String| DatasetError::InvalidSample {
            sample: self.sample_id.clone(),
            reason,
        };
        match self.kind {
            GestureKind::Static if self.frames.len() != 1 => {
                return Err(bad(format!(
                    "static sample must have 1 frame, has {}",
                    self.frames.len()
                )))
            }
            GestureKind::Dynamic if self.frames.len() < 2 => {
                return Err(bad(format!(
                    "dynamic sample needs at least 2 frames, has {}",
                    self.frames.len()
                )))
            }
            _ => {}
        }
        for (i, f) in self.frames.iter().enumerate() {
            f.validate()
                .map_err(|r| bad(format!("frame {i}: {r}")))?;
        }
        if self.kind == GestureKind::Dynamic {
            let (lo, hi) = DG_LENGTH_RANGE;
            if self.frames.len() < lo || self.frames.len() > hi {
                tracing::warn!(
                    sample = %self.sample_id,
                    len = self.frames.len(),
                    "dynamic sample length outside the usual [{lo}, {hi}] range"
                );
            }
        }
        Ok(())
    }
}

/// Per-kind counts, as reported after ingestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub static_samples: usize,
    pub dynamic_samples: usize,
    pub static_classes: usize,
    pub dynamic_classes: usize,
    pub static_users: usize,
    pub dynamic_users: usize,
}

impl DatasetSummary {
    pub fn of(samples: &[GestureSample]) -> Self {
        let mut s = DatasetSummary::default();
        let mut classes = [BTreeSet::new(), BTreeSet::new()];
        let mut users = [BTreeSet::new(), BTreeSet::new()];
        for sample in samples {
            let k = match sample.kind {
                GestureKind::Static => {
                    s.static_samples += 1;
                    0
                }
                GestureKind::Dynamic => {
                    s.dynamic_samples += 1;
                    1
                }
            };
            classes[k].insert(sample.class_id);
            users[k].insert(sample.user_id);
        }
        s.static_classes = classes[0].len();
        s.dynamic_classes = classes[1].len();
        s.static_users = users[0].len();
        s.dynamic_users = users[1].len();
        s
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SG: {} samples, {} classes, {} users; DG: {} samples, {} classes, {} users",
            self.static_samples,
            self.static_classes,
            self.static_users,
            self.dynamic_samples,
            self.dynamic_classes,
            self.dynamic_users
        )
    }
}
