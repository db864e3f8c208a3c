//! Real-coded genetic algorithm that tunes [`MotionThresholds`] to maximize
//! frame-level F1 against labelled calibration streams.

use super::kinematics::{compute_kinematics_frames, Kinematics};
use super::mask::{f1_from_counts, mask_from_kinematics};
use super::{channel_weights, MotionThresholds, SegmentError};
use crate::dataset::Stream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Search ranges. Thresholds are searched on a log10 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub v_th: (f64, f64),
    pub a_th: (f64, f64),
    pub on_count: (usize, usize),
    pub off_count: (usize, usize),
    pub glove_weight: (f64, f64),
}

impl Default for GeneBounds {
    fn default() -> Self {
        Self {
            v_th: (0.2, 100.0),
            a_th: (5.0, 50_000.0),
            on_count: (1, 6),
            off_count: (1, 12),
            glove_weight: (0.0, 0.2),
        }
    }
}

impl GeneBounds {
    fn ranges(&self) -> [(f64, f64); 5] {
        [
            (self.v_th.0.log10(), self.v_th.1.log10()),
            (self.a_th.0.log10(), self.a_th.1.log10()),
            (self.on_count.0 as f64, self.on_count.1 as f64 + 0.999),
            (self.off_count.0 as f64, self.off_count.1 as f64 + 0.999),
            self.glove_weight,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    /// Gaussian mutation step as a fraction of each gene's range.
    pub mutation_sigma: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub seed: u64,
    pub bounds: GeneBounds,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 32,
            generations: 60,
            tournament: 3,
            mutation_sigma: 0.10,
            mutation_rate: 0.3,
            crossover_rate: 0.9,
            elitism: 2,
            seed: 0,
            bounds: GeneBounds::default(),
        }
    }
}

/// Encoded genes: `[log10 v_th, log10 a_th, on_count, off_count, glove weight]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genes: [f64; 5],
}

impl Individual {
    pub fn decode(&self) -> MotionThresholds {
        let g = self.genes;
        MotionThresholds {
            v_th: 10f64.powf(g[0]),
            a_th: 10f64.powf(g[1]),
            on_count: (g[2].floor() as usize).max(1),
            off_count: (g[3].floor() as usize).max(1),
            weights: channel_weights(g[4].max(0.0)).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub thresholds: MotionThresholds,
    pub best_f1: f64,
    /// Best F1 of each generation, starting with the random initial population.
    pub history: Vec<f64>,
    pub initial: Vec<Individual>,
}

struct Fixture {
    kinematics: Kinematics,
    truth: Vec<bool>,
}

fn fitness(ind: &Individual, fixtures: &[Fixture]) -> f64 {
    let th = ind.decode();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for fx in fixtures {
        let m = mask_from_kinematics(fx.kinematics.samples(), &th);
        for (&p, &t) in m.bits().iter().zip(&fx.truth) {
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    f1_from_counts(tp, fp, fn_)
}

fn evaluate(pop: &[Individual], fixtures: &[Fixture]) -> Vec<f64> {
    pop.par_iter().map(|ind| fitness(ind, fixtures)).collect()
}

/// Index of the fittest individual; ties go to the lower index.
fn best_index(fit: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fit.iter().enumerate() {
        if f > fit[best] {
            best = i;
        }
    }
    best
}

fn tournament(fit: &[f64], size: usize, rng: &mut impl Rng) -> usize {
    let mut best = rng.random_range(0..fit.len());
    for _ in 1..size.max(1) {
        let c = rng.random_range(0..fit.len());
        if fit[c] > fit[best] || (fit[c] == fit[best] && c < best) {
            best = c;
        }
    }
    best
}

pub fn calibrate_thresholds(
    calibration: &[(Stream, Vec<bool>)],
    config: &GaConfig,
) -> Result<CalibrationReport, SegmentError> {
    if calibration.is_empty() {
        return Err(SegmentError::EmptyCalibration);
    }
    let fixtures = calibration
        .iter()
        .map(|(stream, truth)| {
            if truth.len() != stream.len() {
                return Err(SegmentError::LengthMismatch {
                    mask: truth.len(),
                    stream: stream.len(),
                });
            }
            Ok(Fixture {
                kinematics: compute_kinematics_frames(&stream.frames)?,
                truth: truth.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let ranges = config.bounds.ranges();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pop_size = config.population.max(1);
    let mut pop: Vec<Individual> = (0..pop_size)
        .map(|_| Individual {
            genes: std::array::from_fn(|k| {
                let (lo, hi) = ranges[k];
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }),
        })
        .collect();
    let initial = pop.clone();
    let mut fit = evaluate(&pop, &fixtures);
    let mut history = vec![fit[best_index(&fit)]];

    for _ in 1..config.generations.max(1) {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
        let mut next: Vec<Individual> = order
            .iter()
            .take(config.elitism.min(pop_size))
            .map(|&i| pop[i])
            .collect();
        while next.len() < pop_size {
            let a = pop[tournament(&fit, config.tournament, &mut rng)];
            let b = pop[tournament(&fit, config.tournament, &mut rng)];
            let mut child = a;
            if rng.random::<f64>() < config.crossover_rate {
                for k in 0..5 {
                    let alpha: f64 = rng.random();
                    child.genes[k] = alpha * a.genes[k] + (1.0 - alpha) * b.genes[k];
                }
            }
            for k in 0..5 {
                if rng.random::<f64>() < config.mutation_rate {
                    let (lo, hi) = ranges[k];
                    let z: f64 = StandardNormal.sample(&mut rng);
                    child.genes[k] = (child.genes[k] + z * config.mutation_sigma * (hi - lo)).clamp(lo, hi);
                }
            }
            next.push(child);
        }
        pop = next;
        fit = evaluate(&pop, &fixtures);
        history.push(fit[best_index(&fit)]);
    }

    let best = best_index(&fit);
    Ok(CalibrationReport {
        thresholds: pop[best].decode(),
        best_f1: fit[best],
        history,
        initial,
    })
}
