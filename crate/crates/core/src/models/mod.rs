//! Classifiers trained from scratch: feed-forward network, KNN and random
//! forest, behind one persisted container.

mod knn;
mod metrics;
mod mlp;
mod rf;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureRow, FeatureSchema, FeatureSet, FeatureVector};
use crate::preprocess::{Scaler, ScalerError};

pub use knn::{Knn, DEFAULT_K};
pub use metrics::{format_pair, GroupScore, Metrics};
pub use mlp::{argmax, Dense, EpochLog, LayerSpec, Mlp, MlpConfig};
pub use rf::{Node, RandomForest, RfConfig, Tree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty or labels do not match rows")]
    EmptyTraining,
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("schema mismatch: model expects {expected}, got {found}")]
    Schema {
        expected: FeatureSchema,
        found: FeatureSchema,
    },
    #[error("training diverged at epoch {epoch} (loss is not finite); learning rate {learning_rate} is probably too high")]
    Diverged { epoch: usize, learning_rate: f64 },
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error(transparent)]
    Scaler(#[from] ScalerError),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ann,
    Knn,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ann, ModelKind::Knn, ModelKind::Rf];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ann => "ANN",
            ModelKind::Knn => "KNN",
            ModelKind::Rf => "RF",
        })
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ann" | "mlp" => Ok(ModelKind::Ann),
            "knn" => Ok(ModelKind::Knn),
            "rf" | "forest" => Ok(ModelKind::Rf),
            _ => Err(ModelError::UnknownKind(s.to_string())),
        }
    }
}

/// Model family plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Ann(MlpConfig),
    Knn { k: usize },
    Rf(RfConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Ann(_) => ModelKind::Ann,
            ModelSpec::Knn { .. } => ModelKind::Knn,
            ModelSpec::Rf(_) => ModelKind::Rf,
        }
    }

    /// Default hyperparameters for a model family on a feature set.
    pub fn default_for(kind: ModelKind, set: FeatureSet) -> Self {
        match kind {
            ModelKind::Ann => ModelSpec::Ann(match set {
                FeatureSet::Sg23 => MlpConfig::static_gestures(),
                FeatureSet::CiFull => MlpConfig::ci_full(),
                FeatureSet::PvFull | FeatureSet::Raw(_) => MlpConfig::pv_full(),
                FeatureSet::PvTs => MlpConfig::pv_ts(),
            }),
            ModelKind::Knn => ModelSpec::Knn { k: DEFAULT_K },
            ModelKind::Rf => ModelSpec::Rf(RfConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Ann(Mlp),
    Knn(Knn),
    Rf(RandomForest),
}

/// Rows and class labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u32>,
}

impl LabeledSet {
    pub fn from_rows(rows: &[FeatureRow]) -> Self {
        Self {
            x: rows.iter().map(|r| r.features.values.clone()).collect(),
            y: rows.iter().map(|r| r.class_id).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// A trained classifier with everything needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub schema: FeatureSchema,
    pub feature_set: FeatureSet,
    pub classes: Vec<u32>,
    pub scaler: Scaler,
    pub model: Classifier,
    /// Mean training length in frames per class, aligned with `classes`;
    /// empty when unknown. Used to estimate completion online.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_lengths: Vec<f64>,
}

fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows.first().map(Vec::len).unwrap_or(0);
    Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j])
}

/// Trains one model. The scaler is fit on `train` only; `val` drives early
/// stopping for the network and is otherwise unused.
pub fn train_model(
    spec: &ModelSpec,
    feature_set: FeatureSet,
    train: &LabeledSet,
    val: Option<&LabeledSet>,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    if train.is_empty() || train.x.len() != train.y.len() {
        return Err(ModelError::EmptyTraining);
    }
    let schema = feature_set.schema();
    if let Some(row) = train.x.iter().find(|r| r.len() != schema.len()) {
        return Err(ModelError::Dimension {
            expected: schema.len(),
            found: row.len(),
        });
    }
    let mut classes: Vec<u32> = train.y.clone();
    classes.sort_unstable();
    classes.dedup();
    let index = |c: u32| classes.binary_search(&c).ok();

    let scaler = if train.len() >= 2 {
        Scaler::fit(&train.x)?
    } else {
        Scaler::identity(schema.len())
    };
    let scale = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>, ModelError> {
        rows.iter().map(|r| scaler.apply(r).map_err(ModelError::from)).collect()
    };
    let xs = scale(&train.x)?;
    let ys: Vec<usize> = train.y.iter().map(|c| index(*c).expect("class from train")).collect();

    let model = match spec {
        ModelSpec::Ann(cfg) => {
            let mut net = Mlp::new(schema.len(), classes.len(), cfg.clone(), seed)?;
            let xm = to_matrix(&xs);
            let val_data = match val {
                Some(v) if !v.is_empty() => {
                    let mut vx = Vec::new();
                    let mut vy = Vec::new();
                    let mut skipped = 0;
                    for (row, c) in v.x.iter().zip(&v.y) {
                        match index(*c) {
                            Some(k) => {
                                vx.push(scaler.apply(row)?);
                                vy.push(k);
                            }
                            None => skipped += 1,
                        }
                    }
                    if skipped > 0 {
                        tracing::warn!(skipped, "validation rows with classes unseen in training were ignored");
                    }
                    Some((to_matrix(&vx), vy))
                }
                _ => None,
            };
            net.fit(&xm, &ys, val_data.as_ref().map(|(a, b)| (a, b.as_slice())), seed)?;
            Classifier::Ann(net)
        }
        ModelSpec::Knn { k } => Classifier::Knn(Knn::fit(&xs, &ys, classes.len(), *k)?),
        ModelSpec::Rf(cfg) => Classifier::Rf(RandomForest::fit(&xs, &ys, classes.len(), cfg, seed)?),
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        schema,
        feature_set,
        classes,
        scaler,
        model,
        class_lengths: Vec::new(),
    })
}

/// Class id and its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: u32,
    pub score: f64,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            Classifier::Ann(_) => ModelKind::Ann,
            Classifier::Knn(_) => ModelKind::Knn,
            Classifier::Rf(_) => ModelKind::Rf,
        }
    }

    fn proba_scaled(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match &self.model {
            Classifier::Ann(net) => {
                let p = net.predict_proba_batch(to_matrix(rows).view());
                p.rows().into_iter().map(|r| r.to_vec()).collect()
            }
            Classifier::Knn(m) => m.predict_proba_batch(rows),
            Classifier::Rf(m) => m.predict_proba_batch(rows),
        }
    }

    /// Probability vector over [`TrainedModel::classes`].
    pub fn predict_proba(&self, z: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        if z.schema != self.schema {
            return Err(ModelError::Schema {
                expected: self.schema,
                found: z.schema,
            });
        }
        self.predict_proba_values(&z.values)
    }

    pub fn predict_proba_values(&self, values: &[f64]) -> Result<Vec<f64>, ModelError> {
        let x = self.scaler.apply(values)?;
        Ok(self.proba_scaled(&[x]).pop().unwrap_or_default())
    }

    pub fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
        let xs: Result<Vec<Vec<f64>>, _> = rows.iter().map(|r| self.scaler.apply(r)).collect();
        let xs = xs?;
        // Large networks on large batches: keep matrices bounded.
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(4096) {
            out.extend(self.proba_scaled(chunk));
        }
        Ok(out)
    }

    pub fn decide(&self, proba: &[f64]) -> Prediction {
        let k = argmax(proba);
        Prediction {
            class_id: self.classes[k],
            score: proba[k],
        }
    }

    pub fn predict(&self, z: &FeatureVector) -> Result<Prediction, ModelError> {
        Ok(self.decide(&self.predict_proba(z)?))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>, ModelError> {
        Ok(self
            .predict_proba_batch(rows)?
            .iter()
            .map(|p| self.decide(p))
            .collect())
    }

    /// Accuracy and confusion on `data`, optionally grouped.
    pub fn evaluate(&self, data: &LabeledSet, groups: Option<&[String]>) -> Result<Metrics, ModelError> {
        let pred: Vec<u32> = self.predict_batch(&data.x)?.iter().map(|p| p.class_id).collect();
        Ok(Metrics::from_predictions(&self.classes, &data.y, &pred, groups))
    }

    /// Records the mean sample length per class from training rows.
    pub fn set_class_lengths(&mut self, rows: &[FeatureRow]) {
        let mut sum = vec![0.0; self.classes.len()];
        let mut seen: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); self.classes.len()];
        for r in rows {
            if let Ok(k) = self.classes.binary_search(&r.class_id) {
                if seen[k].insert(r.sample) {
                    sum[k] += r.n as f64;
                }
            }
        }
        self.class_lengths = sum
            .iter()
            .zip(&seen)
            .map(|(s, n)| if n.is_empty() { 0.0 } else { s / n.len() as f64 })
            .collect();
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let m: TrainedModel = serde_json::from_str(s)?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version(m.version));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests;
