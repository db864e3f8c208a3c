use super::{FeatureError, FeatureSchema, FeatureVector};
use crate::dataset::CHANNELS;
use crate::preprocess::STD_FLOOR;

pub const PV_TOL: f64 = 1e-10;
pub const PV_MAX_ITER: usize = 1000;

/// Plain iterations tried before switching to the squared operator.
const PLAIN_ITER: usize = 64;
const SQUARINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Standardizes each channel over the window (sample std, floored).
pub fn standardize_window(window: &[[f64; CHANNELS]]) -> Vec<[f64; CHANNELS]> {
    let j = window.len();
    let mut out = window.to_vec();
    if j < 2 {
        return out;
    }
    for c in 0..CHANNELS {
        let mean = window.iter().map(|f| f[c]).sum::<f64>() / j as f64;
        let var = window.iter().map(|f| (f[c] - mean).powi(2)).sum::<f64>() / (j - 1) as f64;
        let std = var.sqrt().max(STD_FLOOR);
        for (o, f) in out.iter_mut().zip(window) {
            o[c] = (f[c] - mean) / std;
        }
    }
    out
}

/// Covariance across time of a window, row-major `CHANNELS x CHANNELS`.
pub fn covariance(window: &[[f64; CHANNELS]]) -> Vec<f64> {
    let j = window.len();
    let mut mean = [0.0; CHANNELS];
    for f in window {
        for c in 0..CHANNELS {
            mean[c] += f[c];
        }
    }
    for m in &mut mean {
        *m /= j as f64;
    }
    let mut cov = vec![0.0; CHANNELS * CHANNELS];
    for f in window {
        let mut x = [0.0; CHANNELS];
        for c in 0..CHANNELS {
            x[c] = f[c] - mean[c];
        }
        for a in 0..CHANNELS {
            for b in a..CHANNELS {
                cov[a * CHANNELS + b] += x[a] * x[b];
            }
        }
    }
    let denom = (j.max(2) - 1) as f64;
    for a in 0..CHANNELS {
        for b in a..CHANNELS {
            let v = cov[a * CHANNELS + b] / denom;
            cov[a * CHANNELS + b] = v;
            cov[b * CHANNELS + a] = v;
        }
    }
    cov
}

fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn square_normalized(m: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let a = m[i * d + k];
            if a == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += a * m[k * d + j];
            }
        }
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
    out
}

/// Deterministic, generic start vector.
pub fn start_vector(d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|k| 1.0 + 0.5 * ((k + 1) as f64).sin()).collect();
    normalize(&mut v);
    v
}

/// Flips `v` so its largest-magnitude entry is positive; ties go to the
/// lowest index.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn iterate(m: &[f64], v: &mut Vec<f64>, budget: usize, tol: f64) -> (usize, bool) {
    let mut next = vec![0.0; v.len()];
    for it in 1..=budget {
        matvec(m, v, &mut next);
        if normalize(&mut next) == 0.0 {
            return (it, false);
        }
        let delta = next
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(v, &mut next);
        if delta < tol {
            return (it, true);
        }
    }
    (budget, false)
}

/// Leading eigenvector of a symmetric positive semi-definite `d x d` matrix.
///
/// Runs ordinary power iteration first. If that has not converged after a
/// short budget, the remaining iterations run on `(M/|M|)^(2^SQUARINGS)`,
/// which has the same eigenvectors and a much wider spectral gap.
/// Returns `None` when the matrix is zero.
pub fn power_iteration(m: &[f64], d: usize, tol: f64, max_iter: usize) -> Option<PowerResult> {
    assert_eq!(m.len(), d * d);
    if m.iter().all(|x| *x == 0.0) {
        return None;
    }
    let mut v = start_vector(d);
    let plain = PLAIN_ITER.min(max_iter);
    let (mut iterations, mut converged) = iterate(m, &mut v, plain, tol);
    if !converged && iterations < max_iter {
        let mut op = m.to_vec();
        for _ in 0..SQUARINGS {
            op = square_normalized(&op, d);
        }
        let (more, ok) = iterate(&op, &mut v, max_iter - iterations, tol);
        iterations += more;
        converged = ok;
    }
    if v.iter().all(|x| *x == 0.0) {
        return None;
    }
    fix_sign(&mut v);
    Some(PowerResult {
        vector: v,
        iterations,
        converged,
    })
}

/// Unit leading eigenvector of the covariance of an already standardized
/// window.
pub fn principal_vector(window: &[[f64; CHANNELS]]) -> Result<FeatureVector, FeatureError> {
    let j = window.len();
    if j < 2 {
        return Err(FeatureError::TooShort { needed: 2, found: j });
    }
    let cov = covariance(window);
    let values = match power_iteration(&cov, CHANNELS, PV_TOL, PV_MAX_ITER) {
        Some(r) => {
            if !r.converged {
                tracing::warn!(iterations = r.iterations, "power iteration hit the iteration cap");
            }
            r.vector
        }
        None => {
            tracing::warn!("zero covariance window, returning e1");
            let mut e1 = vec![0.0; CHANNELS];
            e1[0] = 1.0;
            e1
        }
    };
    Ok(FeatureVector {
        schema: FeatureSchema::Pv28,
        values,
        completion: None,
    })
}

/// PV of the prefix `frames[..j]`, standardized over that prefix.
pub fn pv_at(frames: &[[f64; CHANNELS]], j: usize) -> Result<FeatureVector, FeatureError> {
    if j < 2 || j > frames.len() {
        return Err(FeatureError::TooShort { needed: 2, found: j.min(frames.len()) });
    }
    let mut fv = principal_vector(&standardize_window(&frames[..j]))?;
    fv.completion = Some(j as f64 / frames.len() as f64);
    Ok(fv)
}
