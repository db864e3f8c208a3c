use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, q: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if q[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u32]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts } => Some(counts.as_slice()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: RfConfig,
    pub dim: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

fn gini_from(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    min_split: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_on(&self, idx: &[usize], feature: usize, parent: &[u32]) -> Option<BestSplit> {
        let mut vals: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x[i][feature], self.y[i])).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = vals.len() as u32;
        let mut left = vec![0u32; self.n_classes];
        let mut right = parent.to_vec();
        let mut best: Option<BestSplit> = None;
        for s in 0..vals.len() - 1 {
            let (v, c) = vals[s];
            left[c] += 1;
            right[c] -= 1;
            let next = vals[s + 1].0;
            if next <= v {
                continue;
            }
            let nl = s as u32 + 1;
            let nr = n - nl;
            let score = (nl as f64 * gini_from(&left, nl) + nr as f64 * gini_from(&right, nr)) / n as f64;
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&idx);
        let total = idx.len() as u32;
        let impurity = gini_from(&counts, total);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        if impurity == 0.0 || idx.len() < self.min_split {
            return slot;
        }
        let d = self.x[0].len();
        let chosen = sample(rng, d, self.max_features.min(d)).into_vec();
        let pick = |features: &[usize]| -> Option<BestSplit> {
            let mut best: Option<BestSplit> = None;
            for &f in features {
                if let Some(s) = self.best_on(&idx, f, &counts) {
                    if best.as_ref().is_none_or(|b| s.score < b.score) {
                        best = Some(s);
                    }
                }
            }
            best
        };
        let mut split = pick(&chosen);
        if split.is_none() {
            // All sampled features are constant here; try the rest.
            let rest: Vec<usize> = (0..d).filter(|f| !chosen.contains(f)).collect();
            split = pick(&rest);
        }
        let Some(split) = split else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);
        if l.is_empty() || r.is_empty() {
            return slot;
        }
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

impl RandomForest {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        config: &RfConfig,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(ModelError::EmptyTraining);
        }
        if config.n_trees == 0 {
            return Err(ModelError::Config("n_trees must be positive".into()));
        }
        let dim = x[0].len();
        if let Some(row) = x.iter().find(|r| r.len() != dim) {
            return Err(ModelError::Dimension {
                expected: dim,
                found: row.len(),
            });
        }
        let max_features = config
            .max_features
            .unwrap_or_else(|| (dim as f64).sqrt().round() as usize)
            .clamp(1, dim.max(1));
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ t as u64);
                let idx: Vec<usize> = if config.bootstrap {
                    (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                let mut b = Builder {
                    x,
                    y,
                    n_classes,
                    max_features,
                    min_split: config.min_samples_split.max(2),
                    nodes: Vec::new(),
                };
                b.grow(idx, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            dim,
            n_classes,
            trees,
        })
    }

    pub fn predict_proba(&self, q: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            let counts = t.leaf_for(q);
            let total: u32 = counts.iter().sum();
            for (pi, &c) in p.iter_mut().zip(counts) {
                *pi += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    pub fn predict_proba_batch(&self, qs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        qs.par_iter().map(|q| self.predict_proba(q)).collect()
    }
}
