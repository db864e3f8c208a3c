//! Dimensionality-reduced feature pipelines for dynamic gestures.

mod pv;
mod spline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Frame, GestureSample, CHANNELS};
use crate::preprocess::{sg_features, to_local_frames, SG_FEATURES};

pub use pv::{
    covariance, fix_sign, power_iteration, principal_vector, pv_at, standardize_window,
    start_vector, PowerResult, PV_MAX_ITER, PV_TOL,
};
pub use spline::{linear_eval, CubicSpline};

pub const CI_FRAMES: usize = 20;
pub const CI_LEN: usize = CHANNELS * CI_FRAMES;
pub const PV_LEN: usize = CHANNELS;
pub const DEFAULT_RAW_WINDOW: usize = 20;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least {needed} frames, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("shape mismatch: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("unknown feature schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown feature set `{0}`")]
    UnknownSet(String),
    #[error("feature set {0} does not apply here")]
    Unsupported(FeatureSet),
}

/// Schema tag carried by every feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureSchema {
    Sg23,
    Ci560,
    Pv28,
    Raw(usize),
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        match self {
            FeatureSchema::Sg23 => SG_FEATURES,
            FeatureSchema::Ci560 => CI_LEN,
            FeatureSchema::Pv28 => PV_LEN,
            FeatureSchema::Raw(w) => CHANNELS * w,
        }
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSchema::Sg23 => f.write_str("SG-23"),
            FeatureSchema::Ci560 => f.write_str("CI-560"),
            FeatureSchema::Pv28 => f.write_str("PV-28"),
            FeatureSchema::Raw(w) => write!(f, "RAW-{w}"),
        }
    }
}

impl FromStr for FeatureSchema {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SG-23" => Ok(FeatureSchema::Sg23),
            "CI-560" => Ok(FeatureSchema::Ci560),
            "PV-28" => Ok(FeatureSchema::Pv28),
            "RAW" => Ok(FeatureSchema::Raw(DEFAULT_RAW_WINDOW)),
            other => other
                .strip_prefix("RAW-")
                .and_then(|w| w.parse().ok())
                .filter(|w: &usize| *w > 0)
                .map(FeatureSchema::Raw)
                .ok_or_else(|| FeatureError::UnknownSchema(s.to_string())),
        }
    }
}

impl TryFrom<String> for FeatureSchema {
    type Error = FeatureError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FeatureSchema> for String {
    fn from(s: FeatureSchema) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: FeatureSchema,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<f64>,
}

impl FeatureVector {
    pub fn new(schema: FeatureSchema, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != schema.len() {
            return Err(FeatureError::Shape {
                expected: schema.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            schema,
            values,
            completion: None,
        })
    }

    pub fn with_completion(mut self, c: f64) -> Self {
        self.completion = Some(c);
        self
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Feature pipeline used by an experiment or a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureSet {
    Sg23,
    CiFull,
    PvFull,
    PvTs,
    Raw(usize),
}

impl FeatureSet {
    pub fn schema(&self) -> FeatureSchema {
        match self {
            FeatureSet::Sg23 => FeatureSchema::Sg23,
            FeatureSet::CiFull => FeatureSchema::Ci560,
            FeatureSet::PvFull | FeatureSet::PvTs => FeatureSchema::Pv28,
            FeatureSet::Raw(w) => FeatureSchema::Raw(*w),
        }
    }

    pub fn is_dynamic(&self) -> bool {
        !matches!(self, FeatureSet::Sg23)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSet::Sg23 => f.write_str("SG-23"),
            FeatureSet::CiFull => f.write_str("CI-FULL"),
            FeatureSet::PvFull => f.write_str("PV-FULL"),
            FeatureSet::PvTs => f.write_str("PV-TS"),
            FeatureSet::Raw(w) => write!(f, "RAW-{w}"),
        }
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SG" | "SG-23" => Ok(FeatureSet::Sg23),
            "CI" | "CI-560" | "CI-FULL" => Ok(FeatureSet::CiFull),
            "PV" | "PV-28" | "PV-FULL" => Ok(FeatureSet::PvFull),
            "PV-TS" => Ok(FeatureSet::PvTs),
            other => match other.parse::<FeatureSchema>() {
                Ok(FeatureSchema::Raw(w)) => Ok(FeatureSet::Raw(w)),
                _ => Err(FeatureError::UnknownSet(s.to_string())),
            },
        }
    }
}

impl TryFrom<String> for FeatureSet {
    type Error = FeatureError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FeatureSet> for String {
    fn from(s: FeatureSet) -> String {
        s.to_string()
    }
}

/// Timestep indices (1-based frame counts) at which features are taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionSet {
    pub n: usize,
    pub indices: Vec<usize>,
}

pub const TEST_COMPLETIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

impl CompletionSet {
    /// `{ceil(.25n), ceil(.5n), ceil(.75n), n}`, clamped to at least 2.
    pub fn test_subset(n: usize) -> Self {
        Self::fractions(n, &TEST_COMPLETIONS)
    }

    pub fn fractions(n: usize, fractions: &[f64]) -> Self {
        let mut indices: Vec<usize> = fractions
            .iter()
            .map(|f| completion_index(n, *f))
            .collect();
        indices.sort_unstable();
        indices.dedup();
        Self { n, indices }
    }

    /// `{2, ..., n}`.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (2..=n).collect(),
        }
    }

    pub fn last(n: usize) -> Self {
        Self { n, indices: vec![n] }
    }
}

/// Number of frames covering fraction `f` of an `n`-frame gesture.
pub fn completion_index(n: usize, f: f64) -> usize {
    // Small slack so 0.5 * 20 does not round up to 11 through noise.
    let raw = (f * n as f64 - 1e-9).ceil().max(0.0) as usize;
    raw.clamp(2.min(n), n)
}

/// SG-23 vector of one frame.
pub fn sg_vector(frame: &Frame) -> FeatureVector {
    FeatureVector {
        schema: FeatureSchema::Sg23,
        values: sg_features(frame).to_vec(),
        completion: None,
    }
}

fn channel_rows(frames: &[Frame]) -> Vec<[f64; CHANNELS]> {
    frames.iter().map(|f| f.channels).collect()
}

/// Resamples every channel to `n_out` points on normalized time.
pub fn ci_resample(
    sample: &[[f64; CHANNELS]],
    n_out: usize,
) -> Result<Vec<[f64; CHANNELS]>, FeatureError> {
    let n = sample.len();
    if n < 2 {
        return Err(FeatureError::TooShort { needed: 2, found: n });
    }
    if n_out < 2 {
        return Err(FeatureError::TooShort { needed: 2, found: n_out });
    }
    let knots: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let grid: Vec<f64> = (0..n_out).map(|k| k as f64 / (n_out - 1) as f64).collect();
    let mut out = vec![[0.0; CHANNELS]; n_out];
    let mut y = vec![0.0; n];
    for c in 0..CHANNELS {
        for (v, f) in y.iter_mut().zip(sample) {
            *v = f[c];
        }
        match CubicSpline::not_a_knot(&knots, &y) {
            Some(s) => {
                for (o, t) in out.iter_mut().zip(&grid) {
                    o[c] = s.eval(*t);
                }
            }
            None => {
                for (o, t) in out.iter_mut().zip(&grid) {
                    o[c] = linear_eval(&knots, &y, *t);
                }
            }
        }
        out[0][c] = y[0];
        out[n_out - 1][c] = y[n - 1];
    }
    Ok(out)
}

/// Frame-major concatenation of a `20 x 28` matrix.
pub fn flatten(z: &[[f64; CHANNELS]]) -> Result<FeatureVector, FeatureError> {
    if z.len() != CI_FRAMES {
        return Err(FeatureError::Shape {
            expected: CI_LEN,
            found: z.len() * CHANNELS,
        });
    }
    FeatureVector::new(FeatureSchema::Ci560, flatten_frames(z))
}

fn flatten_frames(z: &[[f64; CHANNELS]]) -> Vec<f64> {
    z.iter().flat_map(|f| f.iter().copied()).collect()
}

pub fn unflatten(values: &[f64]) -> Result<Vec<[f64; CHANNELS]>, FeatureError> {
    if !values.len().is_multiple_of(CHANNELS) || values.is_empty() {
        return Err(FeatureError::Shape {
            expected: CI_LEN,
            found: values.len(),
        });
    }
    Ok(values
        .chunks_exact(CHANNELS)
        .map(|c| {
            let mut f = [0.0; CHANNELS];
            f.copy_from_slice(c);
            f
        })
        .collect())
}

/// PV features at every index of `set`, each standardized over its own
/// prefix window.
pub fn pv_timeseries(
    sample: &[[f64; CHANNELS]],
    set: &CompletionSet,
) -> Result<Vec<(usize, FeatureVector)>, FeatureError> {
    if sample.len() < 2 {
        return Err(FeatureError::TooShort {
            needed: 2,
            found: sample.len(),
        });
    }
    set.indices
        .iter()
        .map(|&j| pv_at(sample, j).map(|fv| (j, fv)))
        .collect()
}

/// Last `window` frames of `frames[..j]`, front-padded with the first frame.
pub fn raw_window(
    frames: &[[f64; CHANNELS]],
    j: usize,
    window: usize,
) -> Result<FeatureVector, FeatureError> {
    if j == 0 || j > frames.len() {
        return Err(FeatureError::TooShort { needed: 1, found: j.min(frames.len()) });
    }
    let start = j.saturating_sub(window);
    let mut rows = Vec::with_capacity(window);
    for _ in 0..window.saturating_sub(j) {
        rows.push(frames[0]);
    }
    rows.extend_from_slice(&frames[start..j]);
    Ok(FeatureVector::new(FeatureSchema::Raw(window), flatten_frames(&rows))?
        .with_completion(j as f64 / frames.len() as f64))
}

/// Features of the prefix `local[..j]` of an already Ψ-transformed dynamic
/// gesture. CI ignores the prefix length and uses all frames given.
pub fn dg_features_at(
    set: FeatureSet,
    local: &[[f64; CHANNELS]],
    j: usize,
) -> Result<FeatureVector, FeatureError> {
    match set {
        FeatureSet::CiFull => {
            let n = local.len().min(j);
            flatten(&ci_resample(&local[..n], CI_FRAMES)?)
        }
        FeatureSet::PvFull | FeatureSet::PvTs => pv_at(local, j),
        FeatureSet::Raw(w) => raw_window(local, j, w),
        FeatureSet::Sg23 => Err(FeatureError::Unsupported(set)),
    }
}

/// Ψ-transformed channel rows of a gesture.
pub fn local_rows(frames: &[Frame]) -> Vec<[f64; CHANNELS]> {
    channel_rows(&to_local_frames(frames))
}

/// Full-length features of a dynamic gesture given in world coordinates.
pub fn dg_features(set: FeatureSet, frames: &[Frame]) -> Result<FeatureVector, FeatureError> {
    let local = local_rows(frames);
    let n = local.len();
    let mut fv = dg_features_at(set, &local, n)?;
    if matches!(set, FeatureSet::PvFull | FeatureSet::PvTs | FeatureSet::Raw(_)) {
        fv.completion = Some(1.0);
    }
    Ok(fv)
}

/// One labelled feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sample: usize,
    pub class_id: u32,
    pub j: usize,
    pub n: usize,
    pub features: FeatureVector,
}

impl FeatureRow {
    pub fn completion(&self) -> f64 {
        self.j as f64 / self.n as f64
    }
}

/// Which timesteps to extract from each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Timesteps {
    /// `{n}` only.
    Last,
    /// `{2..n}`.
    All,
    /// The four test fractions.
    TestSubset,
}

impl Timesteps {
    pub fn set(&self, n: usize) -> CompletionSet {
        match self {
            Timesteps::Last => CompletionSet::last(n),
            Timesteps::All => CompletionSet::full(n),
            Timesteps::TestSubset => CompletionSet::test_subset(n),
        }
    }
}

/// Feature rows for a list of samples. SG samples produce one row per frame;
/// dynamic feature sets produce one row per selected timestep.
pub fn extract_rows(
    set: FeatureSet,
    samples: &[&GestureSample],
    steps: Timesteps,
) -> Result<Vec<FeatureRow>, FeatureError> {
    use rayon::prelude::*;
    let per_sample: Result<Vec<Vec<FeatureRow>>, FeatureError> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| sample_rows(set, i, s, steps))
        .collect();
    Ok(per_sample?.into_iter().flatten().collect())
}

fn sample_rows(
    set: FeatureSet,
    index: usize,
    s: &GestureSample,
    steps: Timesteps,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let n = s.frames.len();
    if set == FeatureSet::Sg23 {
        return Ok(s
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| FeatureRow {
                sample: index,
                class_id: s.class_id,
                j: k + 1,
                n,
                features: sg_vector(f),
            })
            .collect());
    }
    let local = local_rows(&s.frames);
    let steps = match set {
        FeatureSet::CiFull | FeatureSet::PvFull => Timesteps::Last,
        _ => steps,
    };
    steps
        .set(n)
        .indices
        .into_iter()
        .map(|j| {
            let mut features = dg_features_at(set, &local, j)?;
            features.completion = Some(j as f64 / n as f64);
            Ok(FeatureRow {
                sample: index,
                class_id: s.class_id,
                j,
                n,
                features,
            })
        })
        .collect()
}

/// Writes feature rows as CSV: `sample,class,j,n,f0..`.
pub fn write_rows_csv<W: std::io::Write>(rows: &[FeatureRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let width = rows.first().map(|r| r.features.values.len()).unwrap_or(0);
    let mut header = vec!["sample".to_string(), "class".into(), "j".into(), "n".into()];
    header.extend((0..width).map(|k| format!("f{k}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.sample.to_string(),
            r.class_id.to_string(),
            r.j.to_string(),
            r.n.to_string(),
        ];
        rec.extend(r.features.values.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn channel_fill(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<[f64; CHANNELS]> {
        (0..n)
            .map(|i| {
                let mut r = [0.0; CHANNELS];
                for (c, v) in r.iter_mut().enumerate() {
                    *v = f(i, c);
                }
                r
            })
            .collect()
    }

    #[test]
    fn completion_subset_for_20() {
        assert_eq!(CompletionSet::test_subset(20).indices, vec![5, 10, 15, 20]);
        assert_eq!(CompletionSet::test_subset(21).indices, vec![6, 11, 16, 21]);
        assert_eq!(CompletionSet::test_subset(3).indices, vec![2, 3]);
    }

    #[test]
    fn schema_round_trip() {
        for s in ["SG-23", "CI-560", "PV-28", "RAW-7"] {
            assert_eq!(s.parse::<FeatureSchema>().unwrap().to_string(), s);
        }
        assert_eq!("raw".parse::<FeatureSchema>().unwrap(), FeatureSchema::Raw(20));
        assert!("PV-29".parse::<FeatureSchema>().is_err());
        let json = serde_json::to_string(&FeatureSchema::Ci560).unwrap();
        assert_eq!(json, "\"CI-560\"");
        assert_eq!("pv".parse::<FeatureSet>().unwrap(), FeatureSet::PvFull);
        assert_eq!("ci".parse::<FeatureSet>().unwrap(), FeatureSet::CiFull);
        assert_eq!("PV-TS".parse::<FeatureSet>().unwrap(), FeatureSet::PvTs);
    }

    #[test]
    fn constant_channel_resamples_to_constant() {
        let s = channel_fill(37, |_, c| c as f64 * 1.5 - 4.0);
        let z = ci_resample(&s, 20).unwrap();
        for f in &z {
            for c in 0..CHANNELS {
                assert_eq!(f[c], c as f64 * 1.5 - 4.0);
            }
        }
    }

    #[test]
    fn identity_when_sizes_match() {
        let s = channel_fill(20, |i, c| ((i * 31 + c * 7) % 11) as f64 - 5.0);
        assert_eq!(ci_resample(&s, 20).unwrap(), s);
    }

    #[test]
    fn cubic_is_reproduced() {
        let s = channel_fill(50, |i, _| (i as f64 / 49.0).powi(3));
        let z = ci_resample(&s, 20).unwrap();
        for (k, f) in z.iter().enumerate() {
            let u = k as f64 / 19.0;
            assert!((f[3] - u.powi(3)).abs() < 1e-9);
        }
    }

    #[test]
    fn short_samples() {
        let s = channel_fill(3, |i, _| i as f64);
        let z = ci_resample(&s, 5).unwrap();
        assert_eq!(z[2][0], 1.0);
        assert!(ci_resample(&s[..1], 5).is_err());
        assert!(ci_resample(&s, 1).is_err());
    }

    #[test]
    fn flatten_is_frame_major() {
        let z = channel_fill(20, |i, _| (i + 1) as f64);
        let v = flatten(&z).unwrap();
        assert_eq!(v.values.len(), 560);
        assert!(v.values[..28].iter().all(|x| *x == 1.0));
        assert!(v.values[28..56].iter().all(|x| *x == 2.0));
        assert_eq!(unflatten(&v.values).unwrap(), z);
        assert!(flatten(&z[..19]).is_err());
        let zero = flatten(&channel_fill(20, |_, _| 0.0)).unwrap();
        assert!(zero.values.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn raw_window_pads_front() {
        let s = channel_fill(5, |i, _| i as f64);
        let v = raw_window(&s, 2, 4).unwrap();
        let firsts: Vec<f64> = v.values.chunks(CHANNELS).map(|c| c[0]).collect();
        assert_eq!(firsts, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.completion, Some(0.4));
    }

    #[test]
    fn pv_last_equals_full() {
        let s = channel_fill(30, |i, c| ((i * (c + 3)) as f64 * 0.37).sin() * (c + 1) as f64);
        let ts = pv_timeseries(&s, &CompletionSet::last(30)).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].1.values, pv_at(&s, 30).unwrap().values);
    }

    #[test]
    fn time_reversal_keeps_pv() {
        let s = channel_fill(25, |i, c| ((i * (c + 2)) as f64 * 0.21).cos() + 0.1 * c as f64 * i as f64);
        let mut r = s.clone();
        r.reverse();
        let a = pv_at(&s, 25).unwrap().values;
        let b = pv_at(&r, 25).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn endpoints_preserved(n in 2usize..40, m in 2usize..40, seed in any::<u64>()) {
            let s = channel_fill(n, |i, c| (((seed >> (c % 60)) as f64) * 1e-3 + i as f64 * 0.7).sin());
            let z = ci_resample(&s, m).unwrap();
            prop_assert_eq!(z[0], s[0]);
            prop_assert_eq!(z[m - 1], s[n - 1]);
        }

        #[test]
        fn pv_prefix_consistent(n in 4usize..30, k in 2usize..30, seed in 0u64..1000) {
            let j = k.min(n);
            let s = channel_fill(n, |i, c| (((i + 1) * (c + 1)) as f64 * (0.1 + seed as f64 * 1e-3)).sin());
            let full = pv_timeseries(&s, &CompletionSet::full(n)).unwrap();
            let trunc = pv_timeseries(&s[..j], &CompletionSet::last(j)).unwrap();
            prop_assert_eq!(&full[j - 2].1.values, &trunc[0].1.values);
        }
    }
}
