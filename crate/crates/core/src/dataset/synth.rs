//! Hardware-free fixtures: scripted streams with exact motion labels and
//! synthetic labelled SG/DG datasets.
//!
//! A stream script is a key=value file:
//!
//! ```text
//! rate = 100
//! sigma_pos = 0.01      # cm
//! sigma_glove = 0.3
//! sigma_angle = 0.02    # degrees
//! amplitude = 15, 30    # stroke displacement range, cm
//! glove_stroke = 20     # glove displacement magnitude per stroke
//! yaw_stroke = 10       # max yaw change per stroke, degrees
//! blocks = pause:60, stroke:80, pause:50, ramp:40, pause:40
//! ```
//!
//! `stroke` blocks follow a minimum-jerk profile, `ramp` blocks move at
//! constant speed. Stroke and ramp frames are labelled 1 in the mask.

use super::{
    DatasetError, Frame, GestureKind, GestureSample, Stream, CHANNELS, GLOVE_CHANNELS, L1, PITCH,
    ROLL, YAW,
};
use crate::config::KvConfig;
use crate::preprocess::{wrap_degrees, rotate_z};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Pause,
    Stroke,
    Ramp,
}

impl BlockKind {
    pub fn is_motion(self) -> bool {
        !matches!(self, BlockKind::Pause)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rate: f64,
    pub sigma_pos: f64,
    pub sigma_glove: f64,
    pub sigma_angle: f64,
    pub amplitude: (f64, f64),
    pub glove_stroke: f64,
    pub yaw_stroke: f64,
    pub blocks: Vec<Block>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            rate: 100.0,
            sigma_pos: 0.01,
            sigma_glove: 0.3,
            sigma_angle: 0.02,
            amplitude: (15.0, 30.0),
            glove_stroke: 20.0,
            yaw_stroke: 10.0,
            blocks: Vec::new(),
        }
    }
}

impl SynthSpec {
    pub fn with_blocks(blocks: &[(BlockKind, usize)]) -> Self {
        Self {
            blocks: blocks
                .iter()
                .map(|&(kind, frames)| Block { kind, frames })
                .collect(),
            ..Self::default()
        }
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self, DatasetError> {
        let bad = |e: crate::config::ConfigError| DatasetError::Synth(e.to_string());
        let d = Self::default();
        let amplitude = match cfg.parse_list::<f64>("amplitude").map_err(bad)? {
            None => d.amplitude,
            Some(v) if v.len() == 1 => (v[0], v[0]),
            Some(v) if v.len() == 2 => (v[0], v[1]),
            Some(v) => return Err(DatasetError::Synth(format!("amplitude takes 1 or 2 values, got {v:?}"))),
        };
        let blocks_text = cfg
            .require("blocks")
            .map_err(bad)?;
        let mut blocks = Vec::new();
        for item in blocks_text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (kind, frames) = item
                .split_once(':')
                .ok_or_else(|| DatasetError::Synth(format!("block {item:?} is not kind:frames")))?;
            let kind = match kind.trim() {
                "pause" => BlockKind::Pause,
                "stroke" => BlockKind::Stroke,
                "ramp" => BlockKind::Ramp,
                other => return Err(DatasetError::Synth(format!("unknown block type {other:?}"))),
            };
            let frames = frames
                .trim()
                .parse::<usize>()
                .map_err(|e| DatasetError::Synth(format!("block {item:?}: {e}")))?;
            blocks.push(Block { kind, frames });
        }
        Ok(Self {
            rate: cfg.parse_or("rate", d.rate).map_err(bad)?,
            sigma_pos: cfg.parse_or("sigma_pos", d.sigma_pos).map_err(bad)?,
            sigma_glove: cfg.parse_or("sigma_glove", d.sigma_glove).map_err(bad)?,
            sigma_angle: cfg.parse_or("sigma_angle", d.sigma_angle).map_err(bad)?,
            amplitude,
            glove_stroke: cfg.parse_or("glove_stroke", d.glove_stroke).map_err(bad)?,
            yaw_stroke: cfg.parse_or("yaw_stroke", d.yaw_stroke).map_err(bad)?,
            blocks,
        })
    }

    pub fn to_config(&self) -> KvConfig {
        let mut cfg = KvConfig::default();
        cfg.set("rate", self.rate);
        cfg.set("sigma_pos", self.sigma_pos);
        cfg.set("sigma_glove", self.sigma_glove);
        cfg.set("sigma_angle", self.sigma_angle);
        cfg.set("amplitude", format!("{}, {}", self.amplitude.0, self.amplitude.1));
        cfg.set("glove_stroke", self.glove_stroke);
        cfg.set("yaw_stroke", self.yaw_stroke);
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                let name = match b.kind {
                    BlockKind::Pause => "pause",
                    BlockKind::Stroke => "stroke",
                    BlockKind::Ramp => "ramp",
                };
                format!("{name}:{}", b.frames)
            })
            .collect();
        cfg.set("blocks", blocks.join(", "));
        cfg
    }

    pub fn total_frames(&self) -> usize {
        self.blocks.iter().map(|b| b.frames).sum()
    }
}

/// Ground-truth block placement within a synthetic stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockLabel {
    pub kind: BlockKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStream {
    pub stream: Stream,
    pub mask: Vec<bool>,
    pub labels: Vec<BlockLabel>,
}

/// Minimum-jerk position profile on `[0, 1]`.
pub fn minimum_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn random_unit3(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn noisy(clean: &[f64; CHANNELS], spec: &SynthSpec, rng: &mut impl Rng) -> [f64; CHANNELS] {
    let mut out = *clean;
    for (i, v) in out.iter_mut().enumerate() {
        let sigma = if i < GLOVE_CHANNELS {
            spec.sigma_glove
        } else if i < ROLL {
            spec.sigma_pos
        } else {
            spec.sigma_angle
        };
        let e: f64 = StandardNormal.sample(rng);
        *v += sigma * e;
    }
    out[ROLL] = out[ROLL].clamp(-180.0, 180.0);
    out[PITCH] = out[PITCH].clamp(-180.0, 180.0);
    out[YAW] = wrap_degrees(out[YAW]);
    out
}

/// Renders a scripted stream. Deterministic for a given `(spec, seed)`.
pub fn synth_stream(spec: &SynthSpec, seed: u64) -> Result<SynthStream, DatasetError> {
    if spec.blocks.is_empty() || spec.total_frames() == 0 {
        return Err(DatasetError::Synth("script has no frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / spec.rate;

    let mut pose = [0.0; CHANNELS];
    for v in pose.iter_mut().take(GLOVE_CHANNELS) {
        *v = rng.random_range(60.0..180.0);
    }
    for k in 0..3 {
        pose[L1 + k] = rng.random_range(-40.0..40.0);
    }
    pose[ROLL] = rng.random_range(-30.0..30.0);
    pose[PITCH] = rng.random_range(-30.0..30.0);
    pose[YAW] = rng.random_range(-170.0..170.0);

    let mut frames = Vec::with_capacity(spec.total_frames());
    let mut mask = Vec::with_capacity(spec.total_frames());
    let mut labels = Vec::with_capacity(spec.blocks.len());
    for block in &spec.blocks {
        labels.push(BlockLabel {
            kind: block.kind,
            start: frames.len(),
            len: block.frames,
        });
        match block.kind {
            BlockKind::Pause => {
                for _ in 0..block.frames {
                    let t = frames.len() as f64 * dt;
                    frames.push(Frame::new(t, noisy(&pose, spec, &mut rng)));
                    mask.push(false);
                }
            }
            BlockKind::Stroke | BlockKind::Ramp => {
                let start = pose;
                let mut target = pose;
                let dir = random_unit3(&mut rng);
                let amp = if spec.amplitude.1 > spec.amplitude.0 {
                    rng.random_range(spec.amplitude.0..spec.amplitude.1)
                } else {
                    spec.amplitude.0
                };
                for k in 0..3 {
                    target[L1 + k] += dir[k] * amp;
                }
                let gdir: Vec<f64> = (0..GLOVE_CHANNELS)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                let gnorm = gdir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
                for (i, g) in gdir.iter().enumerate() {
                    target[i] = (target[i] + spec.glove_stroke * g / gnorm).clamp(0.0, 255.0);
                }
                let dyaw = if spec.yaw_stroke > 0.0 {
                    rng.random_range(-spec.yaw_stroke..spec.yaw_stroke)
                } else {
                    0.0
                };
                for k in 0..block.frames {
                    let tau = (k as f64 + 0.5) / block.frames as f64;
                    let s = match block.kind {
                        BlockKind::Stroke => minimum_jerk(tau),
                        _ => tau,
                    };
                    let mut clean = start;
                    for i in 0..ROLL {
                        clean[i] = start[i] + s * (target[i] - start[i]);
                    }
                    clean[YAW] = wrap_degrees(start[YAW] + s * dyaw);
                    let t = frames.len() as f64 * dt;
                    frames.push(Frame::new(t, noisy(&clean, spec, &mut rng)));
                    mask.push(true);
                }
                pose = target;
                pose[YAW] = wrap_degrees(start[YAW] + dyaw);
            }
        }
    }
    Ok(SynthStream {
        stream: Stream {
            frames,
            nominal_rate: spec.rate,
        },
        mask,
        labels,
    })
}

/// Shape of a synthetic labelled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDatasetConfig {
    pub sg_classes: u32,
    pub sg_users: u32,
    pub sg_per_class_user: usize,
    pub dg_classes: u32,
    pub dg_users: u32,
    pub dg_per_class_user: usize,
    pub dg_len: (usize, usize),
    /// Frame-level noise multiplier.
    pub noise: f64,
    /// Per-user variation multiplier.
    pub user_spread: f64,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        Self {
            sg_classes: 24,
            sg_users: 8,
            sg_per_class_user: 4,
            dg_classes: 10,
            dg_users: 6,
            dg_per_class_user: 4,
            dg_len: (30, 90),
            noise: 1.0,
            user_spread: 1.0,
        }
    }
}

struct UserTraits {
    glove_offset: [f64; GLOVE_CHANNELS],
    pitch_offset: f64,
    scale: f64,
    speed_skew: f64,
}

fn user_traits(user: u32, seed: u64, spread: f64) -> UserTraits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + user as u64));
    let n = Normal::new(0.0, 6.0 * spread).unwrap();
    let mut glove_offset = [0.0; GLOVE_CHANNELS];
    for v in glove_offset.iter_mut() {
        *v = n.sample(&mut rng);
    }
    UserTraits {
        glove_offset,
        pitch_offset: Normal::new(0.0, 4.0 * spread).unwrap().sample(&mut rng),
        scale: 1.0 + 0.1 * spread * rng.random_range(-1.0..1.0),
        speed_skew: 0.15 * spread * rng.random_range(-1.0..1.0),
    }
}

/// Glove channels that open or close during DG class `class`.
fn dg_fingers(class: u32) -> std::ops::Range<usize> {
    match (class - 1) % 10 {
        7 => 0..11,
        9 => 11..GLOVE_CHANNELS,
        _ => 0..GLOVE_CHANNELS,
    }
}

/// Local-frame displacement (cm), glove blend in `[0, 1]` and yaw offset
/// (degrees) for DG class `class` at phase `s` in `[0, 1]`.
fn dg_path(class: u32, s: f64) -> ([f64; 3], f64, f64) {
    use std::f64::consts::PI;
    let out_back = (PI * s).sin();
    let a = 20.0;
    match (class - 1) % 10 {
        0 => ([a * out_back, 0.0, 0.0], 0.0, 0.0),
        1 => ([0.0, a * out_back, 0.0], 0.0, 0.0),
        2 => ([0.0, 0.0, a * out_back], 0.0, 0.0),
        3 => {
            let th = 2.0 * PI * s;
            ([0.5 * a * (1.0 - th.cos()), 0.5 * a * th.sin(), 0.0], 0.0, 0.0)
        }
        4 => {
            let th = 2.0 * PI * s;
            ([0.5 * a * (1.0 - th.cos()), 0.0, 0.5 * a * th.sin()], 0.0, 0.0)
        }
        5 => ([0.7 * a * s, -0.7 * a * s, 0.0], 0.0, 0.0),
        6 => ([a * out_back, 0.0, 0.0], s, 0.0),
        7 => ([0.0, 0.0, 0.4 * a * (4.0 * PI * s).sin()], out_back, 0.0),
        8 => ([0.0, 0.3 * a * s, 0.0], 0.5 * out_back, 40.0 * (2.0 * PI * s).sin()),
        _ => ([0.0, 0.0, -a * s], 1.0 - s, 0.0),
    }
}

/// Generates SG and DG samples with class structure, per-user variation and
/// Gaussian noise. World placement (position, yaw) is random per DG sample.
pub fn synth_dataset(config: &SynthDatasetConfig, seed: u64) -> Vec<GestureSample> {
    let mut proto_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0C1A_55E5);
    let sg_protos: Vec<([f64; GLOVE_CHANNELS], f64)> = (0..config.sg_classes)
        .map(|_| {
            let mut g = [0.0; GLOVE_CHANNELS];
            for v in g.iter_mut() {
                *v = proto_rng.random_range(30.0..220.0);
            }
            (g, proto_rng.random_range(-60.0..60.0))
        })
        .collect();
    let dg_open: [f64; GLOVE_CHANNELS] = std::array::from_fn(|_| proto_rng.random_range(40.0..80.0));
    let dg_closed: [f64; GLOVE_CHANNELS] =
        std::array::from_fn(|_| proto_rng.random_range(140.0..220.0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let glove_noise = Normal::new(0.0, 5.0 * config.noise).unwrap();
    let angle_noise = Normal::new(0.0, 3.0 * config.noise).unwrap();

    for user in 1..=config.sg_users {
        let traits = user_traits(user, seed, config.user_spread);
        for class in 1..=config.sg_classes {
            let (proto, pitch) = sg_protos[(class - 1) as usize];
            for rep in 0..config.sg_per_class_user {
                let mut ch = [0.0; CHANNELS];
                for i in 0..GLOVE_CHANNELS {
                    ch[i] = (proto[i] + traits.glove_offset[i] + glove_noise.sample(&mut rng))
                        .clamp(0.0, 255.0);
                }
                for k in 0..3 {
                    ch[L1 + k] = rng.random_range(-50.0..50.0);
                }
                ch[ROLL] = rng.random_range(-40.0..40.0);
                ch[PITCH] = (pitch + traits.pitch_offset + angle_noise.sample(&mut rng)).clamp(-90.0, 90.0);
                ch[YAW] = rng.random_range(-180.0..180.0);
                samples.push(GestureSample {
                    sample_id: format!("sg_u{user}_c{class}_r{rep}"),
                    kind: GestureKind::Static,
                    class_id: class,
                    user_id: user,
                    session_id: (rep % 3) as u32 + 1,
                    frames: vec![Frame::new(0.0, ch)],
                });
            }
        }
    }

    let pos_noise = Normal::new(0.0, 0.15 * config.noise).unwrap();
    for user in 1..=config.dg_users {
        let traits = user_traits(user + 100, seed, config.user_spread);
        for class in 1..=config.dg_classes {
            for rep in 0..config.dg_per_class_user {
                let n = rng.random_range(config.dg_len.0..=config.dg_len.1);
                let origin = [
                    rng.random_range(-60.0..60.0),
                    rng.random_range(-60.0..60.0),
                    rng.random_range(-20.0..40.0),
                ];
                let yaw0: f64 = rng.random_range(-180.0..180.0);
                let roll0: f64 = rng.random_range(-20.0..20.0);
                let pitch0: f64 = rng.random_range(-20.0..20.0) + traits.pitch_offset;
                let skew = traits.speed_skew + 0.05 * rng.random_range(-1.0..1.0);
                let frames = (0..n)
                    .map(|k| {
                        let tau = k as f64 / (n - 1) as f64;
                        let s = (tau + skew * tau * (1.0 - tau)).clamp(0.0, 1.0);
                        let (d, blend, dyaw) = dg_path(class, s);
                        let d = [d[0] * traits.scale, d[1] * traits.scale, d[2] * traits.scale];
                        let w = rotate_z(yaw0, d);
                        let mut ch = [0.0; CHANNELS];
                        let fingers = dg_fingers(class);
                        for i in 0..GLOVE_CHANNELS {
                            let b = if fingers.contains(&i) { blend } else { 0.0 };
                            let base = dg_open[i] + b * (dg_closed[i] - dg_open[i]);
                            ch[i] = (base + traits.glove_offset[i] + glove_noise.sample(&mut rng))
                                .clamp(0.0, 255.0);
                        }
                        for k in 0..3 {
                            ch[L1 + k] = origin[k] + w[k] + pos_noise.sample(&mut rng);
                        }
                        ch[ROLL] = (roll0 + angle_noise.sample(&mut rng)).clamp(-180.0, 180.0);
                        ch[PITCH] = (pitch0 + angle_noise.sample(&mut rng)).clamp(-180.0, 180.0);
                        ch[YAW] = wrap_degrees(yaw0 + dyaw + angle_noise.sample(&mut rng));
                        Frame::new(k as f64 * 0.01, ch)
                    })
                    .collect();
                samples.push(GestureSample {
                    sample_id: format!("dg_u{user}_c{class}_r{rep}"),
                    kind: GestureKind::Dynamic,
                    class_id: class,
                    user_id: user,
                    session_id: (rep % 2) as u32 + 1,
                    frames,
                });
            }
        }
    }
    samples
}

/// Concatenates DG samples into one continuous stream, translating each so
/// it starts where the previous ended and separating them by noisy pauses.
/// Returns the stream, its ground-truth mask and the start index of each
/// sample within the stream.
pub fn replay_stream(
    samples: &[&GestureSample],
    pause_frames: usize,
    sigma_pos: f64,
    seed: u64,
) -> (Stream, Vec<bool>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma_pos.max(0.0)).unwrap();
    let mut frames: Vec<Frame> = Vec::new();
    let mut mask = Vec::new();
    let mut starts = Vec::new();
    let mut cursor: Option<[f64; 3]> = None;
    let mut push = |frames: &mut Vec<Frame>, mut ch: [f64; CHANNELS], m: bool, mask: &mut Vec<bool>| {
        for k in 0..3 {
            ch[L1 + k] += noise.sample(&mut rng);
        }
        frames.push(Frame::new(frames.len() as f64 * 0.01, ch));
        mask.push(m);
    };
    for sample in samples {
        let first = sample.frames[0].position();
        let shift = match cursor {
            Some(c) => [c[0] - first[0], c[1] - first[1], c[2] - first[2]],
            None => [0.0; 3],
        };
        let moved: Vec<[f64; CHANNELS]> = sample
            .frames
            .iter()
            .map(|f| {
                let mut ch = f.channels;
                for k in 0..3 {
                    ch[L1 + k] += shift[k];
                }
                ch
            })
            .collect();
        for _ in 0..pause_frames {
            push(&mut frames, moved[0], false, &mut mask);
        }
        starts.push(frames.len());
        for ch in &moved {
            push(&mut frames, *ch, true, &mut mask);
        }
        let last = *moved.last().unwrap();
        for _ in 0..pause_frames {
            push(&mut frames, last, false, &mut mask);
        }
        cursor = Some([last[L1], last[L1 + 1], last[L1 + 2]]);
    }
    (
        Stream {
            frames,
            nominal_rate: 100.0,
        },
        mask,
        starts,
    )
}
