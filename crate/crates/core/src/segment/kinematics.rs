use super::SegmentError;
use crate::dataset::{Frame, Stream, CHANNELS};
use std::collections::VecDeque;

/// Frames between a frame's arrival and its kinematics becoming final.
pub const KINEMATICS_LAG: usize = 4;

const HALF_WINDOW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    pub index: usize,
    pub velocity: [f64; CHANNELS],
    pub acceleration: [f64; CHANNELS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub velocity: Vec<[f64; CHANNELS]>,
    pub acceleration: Vec<[f64; CHANNELS]>,
}

impl Kinematics {
    pub fn samples(&self) -> impl Iterator<Item = KinematicSample> + '_ {
        self.velocity
            .iter()
            .zip(&self.acceleration)
            .enumerate()
            .map(|(index, (v, a))| KinematicSample {
                index,
                velocity: *v,
                acceleration: *a,
            })
    }
}

/// Values addressed by global frame index, keeping only a short tail.
#[derive(Debug, Clone, Default)]
struct Tail<T> {
    base: usize,
    items: VecDeque<T>,
}

impl<T: Copy> Tail<T> {
    fn push(&mut self, v: T) {
        self.items.push_back(v);
        while self.items.len() > 2 * KINEMATICS_LAG + 2 {
            self.items.pop_front();
            self.base += 1;
        }
    }

    fn next_index(&self) -> usize {
        self.base + self.items.len()
    }

    fn get(&self, i: usize) -> T {
        self.items[i - self.base]
    }
}

fn difference(
    values: &Tail<[f64; CHANNELS]>,
    times: &Tail<f64>,
    i: usize,
    n: Option<usize>,
) -> [f64; CHANNELS] {
    let last = n.map(|n| n - 1);
    let (lo, hi) = if n == Some(1) {
        return [0.0; CHANNELS];
    } else if i == 0 {
        (0, 1)
    } else if Some(i) == last {
        (i - 1, i)
    } else {
        (i - 1, i + 1)
    };
    let dt = times.get(hi) - times.get(lo);
    let (a, b) = (values.get(lo), values.get(hi));
    let mut out = [0.0; CHANNELS];
    for c in 0..CHANNELS {
        out[c] = (b[c] - a[c]) / dt;
    }
    out
}

/// Sliding-window kinematics: 5-frame centred moving average, then first and
/// second derivatives by central differences (one-sided at the stream ends).
#[derive(Debug, Clone, Default)]
pub struct KinematicsStream {
    raw: Tail<[f64; CHANNELS]>,
    times: Tail<f64>,
    smooth: Tail<[f64; CHANNELS]>,
    velocity: Tail<[f64; CHANNELS]>,
    emitted: usize,
}

impl KinematicsStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frames_seen(&self) -> usize {
        self.raw.next_index()
    }

    fn smooth_at(&self, i: usize, n: Option<usize>) -> [f64; CHANNELS] {
        let lo = i.saturating_sub(HALF_WINDOW);
        let hi = match n {
            Some(n) => (i + HALF_WINDOW).min(n - 1),
            None => i + HALF_WINDOW,
        };
        let mut acc = [0.0; CHANNELS];
        for k in lo..=hi {
            let x = self.raw.get(k);
            for c in 0..CHANNELS {
                acc[c] += x[c];
            }
        }
        let count = (hi - lo + 1) as f64;
        acc.iter_mut().for_each(|v| *v /= count);
        acc
    }

    fn advance(&mut self, n: Option<usize>, out: &mut Vec<KinematicSample>) {
        let available = self.raw.next_index();
        let limit = |lag: usize| match n {
            Some(n) => n,
            None => available.saturating_sub(lag),
        };
        while self.smooth.next_index() < limit(HALF_WINDOW) {
            let i = self.smooth.next_index();
            let s = self.smooth_at(i, n);
            self.smooth.push(s);
        }
        while self.velocity.next_index() < limit(HALF_WINDOW + 1) {
            let i = self.velocity.next_index();
            let v = difference(&self.smooth, &self.times, i, n);
            self.velocity.push(v);
        }
        while self.emitted < limit(KINEMATICS_LAG) {
            let i = self.emitted;
            let a = difference(&self.velocity, &self.times, i, n);
            out.push(KinematicSample {
                index: i,
                velocity: self.velocity.get(i),
                acceleration: a,
            });
            self.emitted += 1;
        }
    }

    /// Adds a frame; returns samples that became final (lagging by
    /// [`KINEMATICS_LAG`] frames).
    pub fn push(&mut self, frame: &Frame) -> Vec<KinematicSample> {
        self.raw.push(frame.channels);
        self.times.push(frame.t);
        let mut out = Vec::new();
        self.advance(None, &mut out);
        out
    }

    /// Flushes the remaining frames using one-sided differences at the end.
    pub fn finish(&mut self) -> Vec<KinematicSample> {
        let n = self.raw.next_index();
        let mut out = Vec::new();
        if n > 0 {
            self.advance(Some(n), &mut out);
        }
        out
    }
}

/// Batch velocity and acceleration for every frame of a stream.
pub fn compute_kinematics(stream: &Stream) -> Result<Kinematics, SegmentError> {
    compute_kinematics_frames(&stream.frames)
}

pub(crate) fn compute_kinematics_frames(frames: &[Frame]) -> Result<Kinematics, SegmentError> {
    if frames.len() < 3 {
        return Err(SegmentError::TooShort(frames.len()));
    }
    let mut ks = KinematicsStream::new();
    let mut samples = Vec::with_capacity(frames.len());
    for f in frames {
        samples.extend(ks.push(f));
    }
    samples.extend(ks.finish());
    debug_assert_eq!(samples.len(), frames.len());
    Ok(Kinematics {
        velocity: samples.iter().map(|s| s.velocity).collect(),
        acceleration: samples.iter().map(|s| s.acceleration).collect(),
    })
}
