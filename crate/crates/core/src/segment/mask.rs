use super::kinematics::{compute_kinematics_frames, KinematicSample, KinematicsStream};
use super::{MotionThresholds, SegmentError};
use crate::dataset::{Frame, Stream};
use serde::{Deserialize, Serialize};

/// Per-frame motion labels `Γ(S)`: `false` static, `true` moving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionMask(pub Vec<bool>);

impl MotionMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|b| *b != 0).collect())
    }

    /// Maximal runs of motion as `(start, len)`.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &m) in self.0.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i - s));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.0.len() - s));
        }
        runs
    }
}

/// Frame-level F1 of `predicted` against `truth`, motion as the positive
/// class. Two all-static masks agree perfectly and score 1.
pub fn frame_f1(predicted: &[bool], truth: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    f1_from_counts(tp, fp, fn_)
}

pub(crate) fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Run-length hysteresis over candidate flags. The state flips only after
/// `on_count` consecutive candidates (or `off_count` consecutive
/// non-candidates), and the flip is dated back to the first frame of that
/// run; shorter runs take the current state. Output lags input by at most
/// `max(on_count, off_count) - 1` frames and is always in index order.
#[derive(Debug, Clone)]
pub struct Hysteresis {
    on_count: usize,
    off_count: usize,
    state: bool,
    next: usize,
    pending: usize,
}

impl Hysteresis {
    pub fn new(on_count: usize, off_count: usize) -> Self {
        Self {
            on_count: on_count.max(1),
            off_count: off_count.max(1),
            state: false,
            next: 0,
            pending: 0,
        }
    }

    fn resolve(&mut self, count: usize, bit: bool, out: &mut Vec<(usize, bool)>) {
        for _ in 0..count {
            out.push((self.next, bit));
            self.next += 1;
        }
    }

    pub fn push(&mut self, candidate: bool) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        if candidate == self.state {
            let pending = std::mem::take(&mut self.pending);
            self.resolve(pending + 1, self.state, &mut out);
        } else {
            self.pending += 1;
            let needed = if self.state { self.off_count } else { self.on_count };
            if self.pending >= needed {
                self.state = !self.state;
                let pending = std::mem::take(&mut self.pending);
                self.resolve(pending, self.state, &mut out);
            }
        }
        out
    }

    pub fn finish(&mut self) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        let pending = std::mem::take(&mut self.pending);
        self.resolve(pending, self.state, &mut out);
        out
    }
}

/// Incremental motion detector: kinematics window, candidate test and
/// hysteresis. Emits `(index, bit)` once each frame's label is final.
#[derive(Debug, Clone)]
pub struct MotionDetector {
    thresholds: MotionThresholds,
    kinematics: KinematicsStream,
    hysteresis: Hysteresis,
    last_kinematics: Option<KinematicSample>,
}

impl MotionDetector {
    pub fn new(thresholds: MotionThresholds) -> Result<Self, SegmentError> {
        thresholds.validate()?;
        Ok(Self {
            hysteresis: Hysteresis::new(thresholds.on_count, thresholds.off_count),
            thresholds,
            kinematics: KinematicsStream::new(),
            last_kinematics: None,
        })
    }

    pub fn thresholds(&self) -> &MotionThresholds {
        &self.thresholds
    }

    pub fn last_kinematics(&self) -> Option<&KinematicSample> {
        self.last_kinematics.as_ref()
    }

    fn feed(&mut self, samples: Vec<KinematicSample>, out: &mut Vec<(usize, bool)>) {
        for k in samples {
            let c = self.thresholds.is_candidate(&k);
            self.last_kinematics = Some(k);
            out.extend(self.hysteresis.push(c));
        }
    }

    pub fn push(&mut self, frame: &Frame) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        let samples = self.kinematics.push(frame);
        self.feed(samples, &mut out);
        out
    }

    pub fn finish(&mut self) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        let samples = self.kinematics.finish();
        self.feed(samples, &mut out);
        out.extend(self.hysteresis.finish());
        out
    }
}

/// Labels every frame as static or moving.
pub fn motion_mask(stream: &Stream, thresholds: &MotionThresholds) -> Result<MotionMask, SegmentError> {
    thresholds.validate()?;
    let kin = compute_kinematics_frames(&stream.frames)?;
    Ok(mask_from_kinematics(kin.samples(), thresholds))
}

pub(crate) fn mask_from_kinematics(
    samples: impl Iterator<Item = KinematicSample>,
    thresholds: &MotionThresholds,
) -> MotionMask {
    let mut h = Hysteresis::new(thresholds.on_count, thresholds.off_count);
    let mut bits = Vec::new();
    for k in samples {
        bits.extend(h.push(thresholds.is_candidate(&k)).into_iter().map(|(_, b)| b));
    }
    bits.extend(h.finish().into_iter().map(|(_, b)| b));
    MotionMask(bits)
}
