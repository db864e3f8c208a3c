//! Feed-forward classifier: ReLU hidden layers, softmax output, SGD.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    /// Std of additive Gaussian noise after the activation (training only).
    #[serde(default)]
    pub noise: f64,
    /// Drop probability after the noise (training only).
    #[serde(default)]
    pub dropout: f64,
}

impl LayerSpec {
    pub fn dense(units: usize) -> Self {
        Self {
            units,
            noise: 0.0,
            dropout: 0.0,
        }
    }

    pub fn noise(mut self, sigma: f64) -> Self {
        self.noise = sigma;
        self
    }

    pub fn dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<LayerSpec>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self::static_gestures()
    }
}

impl MlpConfig {
    pub fn static_gestures() -> Self {
        Self {
            hidden: vec![LayerSpec::dense(200).noise(0.6), LayerSpec::dense(200)],
            learning_rate: 0.001,
            batch_size: 32,
            l2: 0.005,
            weight_decay: 1e-7,
            max_epochs: 300,
            patience: 10,
        }
    }

    pub fn ci_full() -> Self {
        Self {
            hidden: vec![LayerSpec::dense(100), LayerSpec::dense(200)],
            learning_rate: 0.01,
            batch_size: 128,
            ..Self::static_gestures()
        }
    }

    pub fn pv_full() -> Self {
        Self::ci_full()
    }

    pub fn pv_ts() -> Self {
        Self {
            hidden: vec![
                LayerSpec::dense(512).noise(0.1).dropout(0.5),
                LayerSpec::dense(256).noise(0.1),
            ],
            ..Self::ci_full()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.hidden.iter().any(|l| l.units == 0) {
            return bad("hidden layers need at least one unit");
        }
        if self
            .hidden
            .iter()
            .any(|l| !(0.0..1.0).contains(&l.dropout) || l.noise < 0.0)
        {
            return bad("dropout must be in [0,1) and noise non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub config: MlpConfig,
    pub layers: Vec<Dense>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

fn relu(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Mean cross-entropy of softmax outputs.
fn cross_entropy(p: &Array2<f64>, y: &[usize]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .enumerate()
        .map(|(i, &c)| -(p[[i, c]].max(1e-300)).ln())
        .sum::<f64>()
        / n
}

struct Trace {
    /// Layer inputs, one per dense layer.
    inputs: Vec<Array2<f64>>,
    /// Multiplicative masks applied after each hidden activation, including
    /// the ReLU derivative and dropout scaling.
    masks: Vec<Array2<f64>>,
    probs: Array2<f64>,
}

impl Mlp {
    pub fn new(input: usize, classes: usize, config: MlpConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if classes < 1 || input < 1 {
            return Err(ModelError::Config("empty input or output layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input];
        sizes.extend(config.hidden.iter().map(|l| l.units));
        sizes.push(classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-limit..limit)),
                    b: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self {
            config,
            layers,
            log: Vec::new(),
            best_epoch: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().map(|l| l.w.ncols()).unwrap_or(0)
    }

    fn forward(&self, x: ArrayView2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len() - 1);
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w) + &layer.b;
            inputs.push(a);
            if k == last {
                softmax_rows(&mut z);
                a = z;
                break;
            }
            relu(&mut z);
            let mut mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if let Some(r) = rng.as_deref_mut() {
                let spec = &self.config.hidden[k];
                if spec.noise > 0.0 {
                    z.mapv_inplace(|v| {
                        let e: f64 = StandardNormal.sample(r);
                        v + spec.noise * e
                    });
                }
                if spec.dropout > 0.0 {
                    let keep = 1.0 - spec.dropout;
                    let drop = Array2::from_shape_fn(z.raw_dim(), |_| {
                        if r.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    z *= &drop;
                    mask *= &drop;
                }
            }
            masks.push(mask);
            a = z;
        }
        Trace {
            inputs,
            masks,
            probs: a,
        }
    }

    fn penalty(&self) -> f64 {
        self.config.l2
            * self
                .layers
                .iter()
                .map(|l| l.w.iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
    }

    fn backward(&self, trace: &Trace, y: &[usize]) -> Vec<Dense> {
        let n = y.len() as f64;
        let mut delta = trace.probs.clone();
        for (i, &c) in y.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= n;
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let gw = trace.inputs[k].t().dot(&delta) + &(&layer.w * (2.0 * self.config.l2));
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if k > 0 {
                delta = delta.dot(&layer.w.t()) * &trace.masks[k - 1];
            }
        }
        grads.reverse();
        grads
    }

    /// Loss (mean cross-entropy plus L2 penalty) of the deterministic network.
    pub fn loss(&self, x: ArrayView2<f64>, y: &[usize]) -> f64 {
        let t = self.forward(x, None);
        cross_entropy(&t.probs, y) + self.penalty()
    }

    /// Loss and flattened gradient of the deterministic network, in the order
    /// of [`Mlp::flat_params`].
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[usize]) -> (f64, Vec<f64>) {
        let t = self.forward(x, None);
        let loss = cross_entropy(&t.probs, y) + self.penalty();
        let grads = self.backward(&t, y);
        let flat = grads
            .iter()
            .flat_map(|g| g.w.iter().chain(g.b.iter()).copied().collect::<Vec<_>>())
            .collect();
        (loss, flat)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("parameter vector too short");
            }
        }
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x, None).probs
    }

    fn sgd_step(&mut self, grads: &[Dense]) {
        let lr = self.config.learning_rate;
        let decay = 1.0 - self.config.weight_decay;
        for (l, g) in self.layers.iter_mut().zip(grads) {
            l.w.zip_mut_with(&g.w, |w, d| *w = *w * decay - lr * d);
            l.b.zip_mut_with(&g.b, |b, d| *b -= lr * d);
        }
    }

    /// Trains with minibatch SGD. With validation data, stops after
    /// `patience` epochs without a new validation-loss minimum and restores
    /// the best weights.
    pub fn fit(
        &mut self,
        x: &Array2<f64>,
        y: &[usize],
        val: Option<(&Array2<f64>, &[usize])>,
        seed: u64,
    ) -> Result<(), ModelError> {
        if x.nrows() != y.len() || x.nrows() == 0 {
            return Err(ModelError::EmptyTraining);
        }
        if x.ncols() != self.input_dim() {
            return Err(ModelError::Dimension {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        let val = val.filter(|(vx, vy)| vx.nrows() > 0 && vx.nrows() == vy.len());
        let mut best: Option<(f64, Vec<Dense>, usize)> = None;
        let mut since_best = 0;
        let bs = self.config.batch_size;
        for epoch in 1..=self.config.max_epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                let xb = x.select(Axis(0), chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                let trace = self.forward(xb.view(), Some(&mut rng));
                let batch_loss = cross_entropy(&trace.probs, &yb);
                if !batch_loss.is_finite() {
                    return Err(ModelError::Diverged {
                        epoch,
                        learning_rate: self.config.learning_rate,
                    });
                }
                total += batch_loss * chunk.len() as f64;
                let grads = self.backward(&trace, &yb);
                self.sgd_step(&grads);
            }
            let train_loss = total / x.nrows() as f64 + self.penalty();
            if !train_loss.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    learning_rate: self.config.learning_rate,
                });
            }
            let (val_loss, val_accuracy) = match val {
                Some((vx, vy)) => {
                    let p = self.predict_proba_batch(vx.view());
                    let acc = accuracy_of(&p, vy);
                    (Some(cross_entropy(&p, vy) + self.penalty()), Some(acc))
                }
                None => (None, None),
            };
            self.log.push(EpochLog {
                epoch,
                train_loss,
                val_loss,
                val_accuracy,
            });
            if let Some(vl) = val_loss {
                if best.as_ref().is_none_or(|(b, _, _)| vl < *b) {
                    best = Some((vl, self.layers.clone(), epoch));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= self.config.patience {
                        break;
                    }
                }
            }
        }
        match best {
            Some((_, layers, epoch)) => {
                self.layers = layers;
                self.best_epoch = epoch;
            }
            None => self.best_epoch = self.log.len(),
        }
        Ok(())
    }
}

fn accuracy_of(p: &Array2<f64>, y: &[usize]) -> f64 {
    let hits = p
        .rows()
        .into_iter()
        .zip(y)
        .filter(|(row, &c)| argmax(&row.to_vec()) == c)
        .count();
    hits as f64 / y.len().max(1) as f64
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}
