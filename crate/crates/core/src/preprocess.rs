//! User-local reference frame transform and feature standardization.

use crate::dataset::{Frame, GestureSample, GLOVE_CHANNELS, L1, PITCH, YAW};
use serde::{Deserialize, Serialize};

/// Standard deviations are floored here so zero-variance features stay finite.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScalerError {
    #[error("need at least 2 rows to fit a scaler, got {0}")]
    TooFewRows(usize),
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: scaler has {expected} features, input has {found}")]
    Dimension { expected: usize, found: usize },
}

/// Wraps an angle in degrees to `(-180, 180]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}

/// `R_z(yaw) * v`, yaw in degrees.
pub fn rotate_z(yaw_deg: f64, v: [f64; 3]) -> [f64; 3] {
    let (s, c) = yaw_deg.to_radians().sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// Origin and heading of the local frame `{L}`, taken from a gesture's first
/// frame. Shared by the batch transform and the online engine so both produce
/// bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrameAnchor {
    origin: [f64; 3],
    yaw0: f64,
    sin0: f64,
    cos0: f64,
}

impl LocalFrameAnchor {
    pub fn from_frame(first: &Frame) -> Self {
        let yaw0 = first.yaw();
        let (sin0, cos0) = yaw0.to_radians().sin_cos();
        Self {
            origin: first.position(),
            yaw0,
            sin0,
            cos0,
        }
    }

    /// `R_z(yaw0)^T (p - p0)`, yaw relative to `yaw0`; glove, roll and pitch
    /// pass through.
    pub fn apply(&self, frame: &Frame) -> Frame {
        let p = frame.position();
        let d = [
            p[0] - self.origin[0],
            p[1] - self.origin[1],
            p[2] - self.origin[2],
        ];
        let mut out = *frame;
        out.set_position([
            self.cos0 * d[0] + self.sin0 * d[1],
            -self.sin0 * d[0] + self.cos0 * d[1],
            d[2],
        ]);
        out.channels[YAW] = wrap_degrees(frame.yaw() - self.yaw0);
        out
    }
}

pub fn to_local_frames(frames: &[Frame]) -> Vec<Frame> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let anchor = LocalFrameAnchor::from_frame(first);
    frames.iter().map(|f| anchor.apply(f)).collect()
}

pub fn to_local_frame(sample: &GestureSample) -> GestureSample {
    GestureSample {
        frames: to_local_frames(&sample.frames),
        ..sample.clone()
    }
}

/// Static-gesture features: the 22 glove channels followed by pitch.
pub const SG_FEATURES: usize = GLOVE_CHANNELS + 1;

pub fn sg_features(frame: &Frame) -> [f64; SG_FEATURES] {
    let mut z = [0.0; SG_FEATURES];
    z[..GLOVE_CHANNELS].copy_from_slice(frame.glove());
    z[GLOVE_CHANNELS] = frame.channels[PITCH];
    z
}

// Position channels are contiguous starting at L1.
const _: () = assert!(L1 == GLOVE_CHANNELS);

/// Per-feature mean and sample standard deviation from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ScalerError> {
        if rows.len() < 2 {
            return Err(ScalerError::TooFewRows(rows.len()));
        }
        let d = rows[0].as_ref().len();
        let mut mean = vec![0.0; d];
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(ScalerError::Ragged {
                    row: r,
                    expected: d,
                    found: row.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / (n - 1.0)).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &[f64]) -> Result<(), ScalerError> {
        if x.len() != self.dim() {
            return Err(ScalerError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, ScalerError> {
        self.check(x)?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>, ScalerError> {
        self.check(x)?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }
}
