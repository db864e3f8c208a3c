use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub dim: usize,
    pub n_classes: usize,
    /// Row-major training matrix.
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Keeps the `k` best `(distance, index)` pairs in ascending order.
fn insert_best(best: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    let pos = best.partition_point(|b| (b.0, b.1) < cand);
    if pos < k {
        best.insert(pos, cand);
        best.truncate(k);
    }
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, k: usize) -> Result<Self, ModelError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(ModelError::EmptyTraining);
        }
        if k == 0 || k > x.len() {
            return Err(ModelError::Config(format!(
                "k = {k} must be in 1..={}",
                x.len()
            )));
        }
        let dim = x[0].len();
        let mut flat = Vec::with_capacity(dim * x.len());
        for row in x {
            if row.len() != dim {
                return Err(ModelError::Dimension {
                    expected: dim,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            k,
            dim,
            n_classes,
            x: flat,
            y: y.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Exhaustive scan: all distances, sorted by `(distance, index)`.
    pub fn neighbors_brute(&self, q: &[f64]) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = (0..self.len()).map(|i| (sq_dist(q, self.row(i)), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(self.k);
        all
    }

    /// Same neighbours as [`Knn::neighbors_brute`], abandoning a candidate as
    /// soon as its partial distance exceeds the current k-th best.
    pub fn neighbors(&self, q: &[f64]) -> Vec<(f64, usize)> {
        let k = self.k;
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for i in 0..self.len() {
            let row = self.row(i);
            let bound = if best.len() == k { best[k - 1].0 } else { f64::INFINITY };
            let mut acc = 0.0;
            let mut pruned = false;
            for (p, r) in q.iter().zip(row) {
                acc += (p - r) * (p - r);
                if acc > bound {
                    pruned = true;
                    break;
                }
            }
            if !pruned {
                insert_best(&mut best, k, (acc, i));
            }
        }
        best
    }

    pub fn predict_proba(&self, q: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        let nb = self.neighbors(q);
        for (_, i) in &nb {
            votes[self.y[*i]] += 1.0;
        }
        let total = nb.len() as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }

    pub fn predict_proba_batch(&self, qs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        qs.par_iter().map(|q| self.predict_proba(q)).collect()
    }
}
