//! Motion mask over a sliding window, GA threshold calibration and SG/DG
//! candidate extraction.
//!
//! Every stage has an incremental form (`*Stream`/`*Tracker`) that the online
//! engine drives frame by frame; the batch functions replay a recorded stream
//! through the same state machines, so online and offline results are
//! bit-identical.

mod calibrate;
mod extract;
mod kinematics;
mod mask;

pub use calibrate::{calibrate_thresholds, CalibrationReport, GaConfig, GeneBounds, Individual};
pub use extract::{extract_segments, Segment, SegmentConfig, SegmentEvent, SegmentTracker};
pub use kinematics::{compute_kinematics, Kinematics, KinematicsStream, KinematicSample, KINEMATICS_LAG};
pub use mask::{frame_f1, motion_mask, Hysteresis, MotionDetector, MotionMask};

use crate::config::{ConfigError, KvConfig};
use crate::dataset::{CHANNELS, GLOVE_CHANNELS, L1, ROLL};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("need at least 3 frames for kinematics, got {0}")]
    TooShort(usize),
    #[error("mask has {mask} entries but stream has {stream} frames")]
    LengthMismatch { mask: usize, stream: usize },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

pub const DEFAULT_GLOVE_WEIGHT: f64 = 0.05;

/// Channel weights: 1 on `l1..l3`, `glove` on `g1..g22`, 0 on the angles.
pub fn channel_weights(glove: f64) -> [f64; CHANNELS] {
    let mut w = [0.0; CHANNELS];
    w[..GLOVE_CHANNELS].fill(glove);
    w[L1..ROLL].fill(1.0);
    w
}

/// Motion detection parameters. Velocities in channel units per second
/// (cm/s for position), accelerations per second squared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionThresholds {
    pub v_th: f64,
    pub a_th: f64,
    pub on_count: usize,
    pub off_count: usize,
    pub weights: Vec<f64>,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self {
            v_th: 4.0,
            a_th: 400.0,
            on_count: 2,
            off_count: 4,
            weights: channel_weights(DEFAULT_GLOVE_WEIGHT).to_vec(),
        }
    }
}

impl MotionThresholds {
    pub fn validate(&self) -> Result<(), SegmentError> {
        let bad = |m: String| Err(SegmentError::InvalidThresholds(m));
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return bad(format!("v_th must be > 0, got {}", self.v_th));
        }
        if !(self.a_th > 0.0 && self.a_th.is_finite()) {
            return bad(format!("a_th must be > 0, got {}", self.a_th));
        }
        if self.on_count == 0 || self.off_count == 0 {
            return bad("on_count and off_count must be >= 1".into());
        }
        if self.weights.len() != CHANNELS {
            return bad(format!("expected {CHANNELS} weights, got {}", self.weights.len()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn weighted_norm(&self, v: &[f64; CHANNELS]) -> f64 {
        v.iter()
            .zip(&self.weights)
            .map(|(x, w)| (w * x) * (w * x))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_candidate(&self, k: &KinematicSample) -> bool {
        self.weighted_norm(&k.velocity) > self.v_th || self.weighted_norm(&k.acceleration) > self.a_th
    }

    pub fn to_config(&self) -> KvConfig {
        let mut cfg = KvConfig::default();
        cfg.set("v_th", self.v_th);
        cfg.set("a_th", self.a_th);
        cfg.set("on_count", self.on_count);
        cfg.set("off_count", self.off_count);
        let w: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        cfg.set("weights", w.join(", "));
        cfg
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self, SegmentError> {
        let d = Self::default();
        let t = Self {
            v_th: cfg.parse_or("v_th", d.v_th)?,
            a_th: cfg.parse_or("a_th", d.a_th)?,
            on_count: cfg.parse_or("on_count", d.on_count)?,
            off_count: cfg.parse_or("off_count", d.off_count)?,
            weights: cfg.parse_list("weights")?.unwrap_or(d.weights),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        Self::from_config(&KvConfig::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_config().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_file_round_trip() {
        let t = MotionThresholds {
            v_th: 3.25,
            a_th: 812.5,
            on_count: 3,
            off_count: 6,
            weights: channel_weights(0.07).to_vec(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("th.txt");
        t.save(&path).unwrap();
        assert_eq!(MotionThresholds::load(&path).unwrap(), t);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let mut t = MotionThresholds::default();
        t.v_th = 0.0;
        assert!(t.validate().is_err());
        let mut t = MotionThresholds::default();
        t.off_count = 0;
        assert!(t.validate().is_err());
        let mut t = MotionThresholds::default();
        t.weights.pop();
        assert!(t.validate().is_err());
    }
}
