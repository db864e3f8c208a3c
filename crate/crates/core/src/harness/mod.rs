//! Experiment runner: train the model roster on a split, report accuracies,
//! sweep the rejection threshold and export 2D projections.

mod projection;
mod sweep;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::dataset::synth::{synth_dataset, SynthDatasetConfig};
use crate::dataset::{load_dataset, split_dataset, DatasetError, DatasetSplits, GestureKind, GestureSample, SplitRatios};
use crate::features::{
    completion_index, dg_features_at, extract_rows, local_rows, FeatureError, FeatureRow, FeatureSet, Timesteps,
    TEST_COMPLETIONS,
};
use crate::models::{
    format_pair, train_model, LabeledSet, LayerSpec, Metrics, MlpConfig, ModelError, ModelKind, ModelSpec, RfConfig,
    TrainedModel,
};

pub use projection::{class_centroids, export_projection, project_2d, write_projection_csv, ProjectionRow};
pub use sweep::{tau_grid, threshold_sweep, Sweep, SweepPoint};

pub const SYNTHETIC_BANNER: &str =
    "SYNTHETIC DATA: no dataset available, results exercise the pipeline only and are not comparable to published figures";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Holdout {
    None,
    /// The highest user id present.
    Auto,
    User(u32),
}

impl std::str::FromStr for Holdout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" | "" => Ok(Holdout::None),
            "auto" => Ok(Holdout::Auto),
            v => v.parse().map(Holdout::User).map_err(|_| format!("expected none, auto or a user id, got `{v}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub features: FeatureSet,
    pub models: Vec<ModelKind>,
    pub dataset: Option<PathBuf>,
    pub seed: u64,
    pub holdout: Holdout,
    pub ratios: SplitRatios,
    pub completions: Vec<f64>,
    pub output: Option<PathBuf>,
    pub knn_grid: Vec<usize>,
    pub rf: RfConfig,
    /// Replaces the default network for the feature set.
    pub ann: Option<MlpConfig>,
    /// Timesteps used as PV-TS training rows.
    pub pvts_train: Timesteps,
    pub synth: SynthDatasetConfig,
    pub sweep_step: f64,
    pub max_fnr: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            features: FeatureSet::Sg23,
            models: ModelKind::ALL.to_vec(),
            dataset: None,
            seed: 0,
            holdout: Holdout::Auto,
            ratios: SplitRatios::default(),
            completions: TEST_COMPLETIONS.to_vec(),
            output: None,
            knn_grid: vec![1, 3, 5, 7, 9],
            rf: RfConfig::default(),
            ann: None,
            pvts_train: Timesteps::All,
            synth: SynthDatasetConfig::default(),
            sweep_step: 0.001,
            max_fnr: 0.05,
        }
    }
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self, HarnessError> {
        let mut c = Self::default();
        if let Some(v) = cfg.get("name") {
            c.name = v.to_string();
        }
        if let Some(v) = cfg.get("features") {
            c.features = v.parse().map_err(|e: FeatureError| invalid("features", v, e.to_string()))?;
        }
        if let Some(m) = cfg.parse_list::<ModelKind>("models")? {
            c.models = m;
        }
        c.dataset = cfg.get("dataset").filter(|v| !v.is_empty()).map(PathBuf::from);
        c.seed = cfg.parse_or("seed", c.seed)?;
        c.holdout = cfg.parse_or("holdout_user", c.holdout)?;
        if let Some(r) = cfg.parse_list::<f64>("ratios")? {
            let [train, validation, test] = r[..] else {
                return Err(invalid("ratios", cfg.get("ratios").unwrap_or_default(), "expected three values").into());
            };
            c.ratios = SplitRatios { train, validation, test };
        }
        if let Some(v) = cfg.parse_list::<f64>("completions")? {
            c.completions = v;
        }
        c.output = cfg.get("output").map(PathBuf::from);
        if let Some(v) = cfg.parse_list::<usize>("knn.k")? {
            c.knn_grid = v;
        }
        c.rf.n_trees = cfg.parse_or("rf.n_trees", c.rf.n_trees)?;
        c.rf.bootstrap = cfg.parse_or("rf.bootstrap", c.rf.bootstrap)?;
        c.rf.max_features = cfg.parse_value("rf.max_features")?;

        let ann_keys = ["ann.hidden", "ann.learning_rate", "ann.batch_size", "ann.max_epochs", "ann.patience", "ann.l2"];
        if ann_keys.iter().any(|k| cfg.contains(k)) {
            let ModelSpec::Ann(mut a) = ModelSpec::default_for(ModelKind::Ann, c.features) else {
                unreachable!()
            };
            if let Some(units) = cfg.parse_list::<usize>("ann.hidden")? {
                a.hidden = units
                    .iter()
                    .enumerate()
                    .map(|(i, &u)| {
                        let mut l = a.hidden.get(i).cloned().unwrap_or_else(|| LayerSpec::dense(u));
                        l.units = u;
                        l
                    })
                    .collect();
            }
            a.learning_rate = cfg.parse_or("ann.learning_rate", a.learning_rate)?;
            a.batch_size = cfg.parse_or("ann.batch_size", a.batch_size)?;
            a.max_epochs = cfg.parse_or("ann.max_epochs", a.max_epochs)?;
            a.patience = cfg.parse_or("ann.patience", a.patience)?;
            a.l2 = cfg.parse_or("ann.l2", a.l2)?;
            c.ann = Some(a);
        }
        if let Some(v) = cfg.get("pvts.train") {
            c.pvts_train = match v {
                "all" => Timesteps::All,
                "test" => Timesteps::TestSubset,
                "last" => Timesteps::Last,
                _ => return Err(invalid("pvts.train", v, "expected all, test or last").into()),
            };
        }
        let s = &mut c.synth;
        s.sg_classes = cfg.parse_or("synth.sg_classes", s.sg_classes)?;
        s.sg_users = cfg.parse_or("synth.sg_users", s.sg_users)?;
        s.sg_per_class_user = cfg.parse_or("synth.sg_per_class_user", s.sg_per_class_user)?;
        s.dg_classes = cfg.parse_or("synth.dg_classes", s.dg_classes)?;
        s.dg_users = cfg.parse_or("synth.dg_users", s.dg_users)?;
        s.dg_per_class_user = cfg.parse_or("synth.dg_per_class_user", s.dg_per_class_user)?;
        s.noise = cfg.parse_or("synth.noise", s.noise)?;
        s.user_spread = cfg.parse_or("synth.user_spread", s.user_spread)?;
        if let Some(v) = cfg.parse_list::<usize>("synth.dg_len")? {
            let [a, b] = v[..] else {
                return Err(invalid("synth.dg_len", cfg.get("synth.dg_len").unwrap_or_default(), "expected min,max").into());
            };
            s.dg_len = (a, b);
        }
        c.sweep_step = cfg.parse_or("sweep.step", c.sweep_step)?;
        c.max_fnr = cfg.parse_or("sweep.max_fnr", c.max_fnr)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_kv(&KvConfig::load(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.models.is_empty() {
            return Err(HarnessError::Invalid("model roster is empty".into()));
        }
        if self.completions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(HarnessError::Invalid("completions must lie in (0, 1]".into()));
        }
        if self.knn_grid.is_empty() || self.knn_grid.contains(&0) {
            return Err(HarnessError::Invalid("knn.k needs positive values".into()));
        }
        if !(self.sweep_step > 0.0 && self.sweep_step <= 1.0) {
            return Err(HarnessError::Invalid("sweep.step must be in (0, 1]".into()));
        }
        self.ratios.validate()?;
        Ok(())
    }

    pub fn kind(&self) -> GestureKind {
        if self.features.is_dynamic() {
            GestureKind::Dynamic
        } else {
            GestureKind::Static
        }
    }
}

/// Samples of the experiment's gesture kind, and whether they are synthetic.
pub fn load_samples(config: &ExperimentConfig) -> Result<(Vec<GestureSample>, bool), HarnessError> {
    let kind = config.kind();
    let (all, synthetic) = match &config.dataset {
        Some(dir) if dir.join("manifest.csv").exists() => (load_dataset(dir)?, false),
        other => {
            if let Some(dir) = other {
                tracing::warn!(path = %dir.display(), "dataset not found, falling back to synthetic data");
            }
            tracing::warn!("{SYNTHETIC_BANNER}");
            (synth_dataset(&config.synth, config.seed), true)
        }
    };
    let samples: Vec<GestureSample> = all.into_iter().filter(|s| s.kind == kind).collect();
    if samples.is_empty() {
        return Err(HarnessError::Dataset(DatasetError::Empty("no samples of the experiment's gesture kind")));
    }
    Ok((samples, synthetic))
}

pub fn resolve_holdout(holdout: Holdout, samples: &[GestureSample]) -> Option<u32> {
    match holdout {
        Holdout::None => None,
        Holdout::User(u) => Some(u),
        Holdout::Auto => samples.iter().map(|s| s.user_id).max(),
    }
}

/// Test rows tagged with user status and completion label.
#[derive(Debug, Clone)]
pub struct TaggedRows {
    pub rows: Vec<FeatureRow>,
    pub untrained: Vec<bool>,
    /// Requested completion fraction per row (1.0 for full-length features).
    pub fraction: Vec<f64>,
}

impl TaggedRows {
    pub fn set(&self) -> LabeledSet {
        LabeledSet::from_rows(&self.rows)
    }

    pub fn select(&self, keep: impl Fn(usize) -> bool) -> LabeledSet {
        let idx: Vec<usize> = (0..self.rows.len()).filter(|&i| keep(i)).collect();
        LabeledSet {
            x: idx.iter().map(|&i| self.rows[i].features.values.clone()).collect(),
            y: idx.iter().map(|&i| self.rows[i].class_id).collect(),
        }
    }
}

fn refs<'a>(samples: &'a [GestureSample], idx: &[usize]) -> Vec<&'a GestureSample> {
    idx.iter().map(|&i| &samples[i]).collect()
}

/// Evaluation rows: one per frame for SG, one per sample for full-length DG
/// features, one per (sample, completion) for PV-TS.
pub fn evaluation_rows(
    set: FeatureSet,
    samples: &[&GestureSample],
    completions: &[f64],
    holdout: Option<u32>,
) -> Result<TaggedRows, HarnessError> {
    let mut out = TaggedRows {
        rows: Vec::new(),
        untrained: Vec::new(),
        fraction: Vec::new(),
    };
    for (i, s) in samples.iter().enumerate() {
        let untrained = Some(s.user_id) == holdout;
        if set == FeatureSet::PvTs {
            let local = local_rows(&s.frames);
            let n = local.len();
            for &f in completions {
                let j = completion_index(n, f);
                let mut features = dg_features_at(set, &local, j)?;
                features.completion = Some(j as f64 / n as f64);
                out.rows.push(FeatureRow {
                    sample: i,
                    class_id: s.class_id,
                    j,
                    n,
                    features,
                });
                out.untrained.push(untrained);
                out.fraction.push(f);
            }
        } else {
            let rows = extract_rows(set, &[*s], Timesteps::Last)?;
            for mut r in rows {
                r.sample = i;
                out.rows.push(r);
                out.untrained.push(untrained);
                out.fraction.push(1.0);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub params: String,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub test_trained: f64,
    pub test_untrained: Option<f64>,
    /// `(fraction, trained, untrained)` for PV-TS.
    pub by_completion: Vec<(f64, f64, Option<f64>)>,
    pub confusion: Metrics,
    pub train_seconds: f64,
    pub infer_ms_per_row: f64,
}

impl ModelReport {
    pub fn table_cell(&self) -> String {
        format_pair(self.test_trained, self.test_untrained)
    }

    pub fn completion_accuracy(&self, fraction: f64) -> Option<(f64, Option<f64>)> {
        self.by_completion
            .iter()
            .find(|(f, _, _)| (f - fraction).abs() < 1e-9)
            .map(|(_, t, u)| (*t, *u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub features: FeatureSet,
    pub synthetic: bool,
    pub seed: u64,
    pub holdout_user: Option<u32>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_test_untrained: usize,
    pub models: Vec<ModelReport>,
}

/// Accuracy of `model` on the rows selected by `keep`, or `None` if empty.
fn accuracy_where(model: &TrainedModel, tagged: &TaggedRows, keep: impl Fn(usize) -> bool) -> Result<Option<f64>, HarnessError> {
    let set = tagged.select(keep);
    if set.is_empty() {
        return Ok(None);
    }
    Ok(Some(model.evaluate(&set, None)?.accuracy))
}

fn spec_for(config: &ExperimentConfig, kind: ModelKind) -> ModelSpec {
    match (kind, &config.ann) {
        (ModelKind::Ann, Some(a)) => ModelSpec::Ann(a.clone()),
        (ModelKind::Rf, _) => ModelSpec::Rf(config.rf.clone()),
        _ => ModelSpec::default_for(kind, config.features),
    }
}

fn describe(spec: &ModelSpec) -> String {
    match spec {
        ModelSpec::Ann(a) => {
            let layers: Vec<String> = a.hidden.iter().map(|l| l.units.to_string()).collect();
            format!("hidden={} lr={} batch={}", layers.join("x"), a.learning_rate, a.batch_size)
        }
        ModelSpec::Knn { k } => format!("k={k}"),
        ModelSpec::Rf(r) => format!("trees={}", r.n_trees),
    }
}

/// Data prepared once per experiment and shared by every model.
pub struct Prepared {
    pub samples: Vec<GestureSample>,
    pub synthetic: bool,
    pub splits: DatasetSplits,
    pub train_rows: Vec<FeatureRow>,
    pub val: TaggedRows,
    pub test: TaggedRows,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    config.validate()?;
    let (samples, synthetic) = load_samples(config)?;
    let holdout = resolve_holdout(config.holdout, &samples);
    let splits = split_dataset(&samples, config.ratios, holdout, config.seed)?;
    let train_steps = if config.features == FeatureSet::PvTs { config.pvts_train } else { Timesteps::Last };
    let train_rows = extract_rows(config.features, &refs(&samples, &splits.train), train_steps)?;
    let val = evaluation_rows(config.features, &refs(&samples, &splits.validation), &config.completions, holdout)?;
    let test = evaluation_rows(config.features, &refs(&samples, &splits.test), &config.completions, holdout)?;
    Ok(Prepared {
        samples,
        synthetic,
        splits,
        train_rows,
        val,
        test,
    })
}

/// Trains one model family, tuning KNN's k on validation accuracy.
pub fn train_selected(
    config: &ExperimentConfig,
    kind: ModelKind,
    prepared: &Prepared,
) -> Result<(TrainedModel, ModelSpec), HarnessError> {
    let train = LabeledSet::from_rows(&prepared.train_rows);
    let val = prepared.val.set();
    let fit = |spec: &ModelSpec| -> Result<TrainedModel, HarnessError> {
        let mut m = train_model(spec, config.features, &train, Some(&val), config.seed)?;
        m.set_class_lengths(&prepared.train_rows);
        Ok(m)
    };
    if kind != ModelKind::Knn {
        let spec = spec_for(config, kind);
        return Ok((fit(&spec)?, spec));
    }
    let mut best: Option<(f64, TrainedModel, ModelSpec)> = None;
    for &k in &config.knn_grid {
        if k > train.len() {
            continue;
        }
        let spec = ModelSpec::Knn { k };
        let m = fit(&spec)?;
        let acc = if val.is_empty() { 0.0 } else { m.evaluate(&val, None)?.accuracy };
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, m, spec));
        }
    }
    best.map(|(_, m, s)| (m, s))
        .ok_or_else(|| HarnessError::Invalid("no k in knn.k fits the training set".into()))
}

/// Test-split scores of a trained model. Overall and per-group accuracy
/// use full-length rows; PV-TS also gets one pair per completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_test: usize,
    pub test_trained: f64,
    pub test_untrained: Option<f64>,
    pub by_completion: Vec<(f64, f64, Option<f64>)>,
    pub confusion: Metrics,
}

pub fn score_model(config: &ExperimentConfig, model: &TrainedModel, prepared: &Prepared) -> Result<Evaluation, HarnessError> {
    if model.feature_set != config.features {
        return Err(HarnessError::Invalid(format!(
            "model uses {} but the experiment uses {}",
            model.feature_set, config.features
        )));
    }
    let test = &prepared.test;
    let full = |i: usize| test.fraction[i] == 1.0;
    let test_set = test.select(full);
    let confusion = model.evaluate(&test_set, None)?;
    let test_trained = accuracy_where(model, test, |i| full(i) && !test.untrained[i])?.unwrap_or(0.0);
    let test_untrained = accuracy_where(model, test, |i| full(i) && test.untrained[i])?;
    let mut by_completion = Vec::new();
    if config.features == FeatureSet::PvTs {
        for &f in &config.completions {
            let t = accuracy_where(model, test, |i| test.fraction[i] == f && !test.untrained[i])?.unwrap_or(0.0);
            let u = accuracy_where(model, test, |i| test.fraction[i] == f && test.untrained[i])?;
            by_completion.push((f, t, u));
        }
    }
    Ok(Evaluation {
        n_test: test_set.len(),
        test_trained,
        test_untrained,
        by_completion,
        confusion,
    })
}

pub fn evaluate_model(
    config: &ExperimentConfig,
    kind: ModelKind,
    prepared: &Prepared,
) -> Result<(ModelReport, TrainedModel), HarnessError> {
    let started = Instant::now();
    let (model, spec) = train_selected(config, kind, prepared)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let train = LabeledSet::from_rows(&prepared.train_rows);
    let train_accuracy = model.evaluate(&train, None)?.accuracy;
    let val_accuracy = if prepared.val.rows.is_empty() {
        0.0
    } else {
        accuracy_where(&model, &prepared.val, |i| prepared.val.fraction[i] == 1.0)?.unwrap_or(0.0)
    };
    let infer_started = Instant::now();
    let scores = score_model(config, &model, prepared)?;
    let infer_ms_per_row = infer_started.elapsed().as_secs_f64() * 1000.0 / scores.n_test.max(1) as f64;
    Ok((
        ModelReport {
            model: kind,
            params: describe(&spec),
            train_accuracy,
            val_accuracy,
            test_accuracy: scores.confusion.accuracy,
            test_trained: scores.test_trained,
            test_untrained: scores.test_untrained,
            by_completion: scores.by_completion,
            confusion: scores.confusion,
            train_seconds,
            infer_ms_per_row,
        },
        model,
    ))
}

/// Runs the whole roster and writes the outputs when `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, HarnessError> {
    let prepared = prepare(config)?;
    let mut models = Vec::new();
    for &kind in &config.models {
        tracing::info!(model = %kind, features = %config.features, "training");
        models.push(evaluate_model(config, kind, &prepared)?.0);
    }
    let sp = &prepared.splits;
    let report = Report {
        name: config.name.clone(),
        features: config.features,
        synthetic: prepared.synthetic,
        seed: config.seed,
        holdout_user: sp.holdout_user,
        n_train: sp.train.len(),
        n_val: sp.validation.len(),
        n_test: sp.test.len(),
        n_test_untrained: sp
            .test
            .iter()
            .filter(|&&i| Some(prepared.samples[i].user_id) == sp.holdout_user)
            .count(),
        models,
    };
    if let Some(dir) = &config.output {
        report.write(dir)?;
    }
    Ok(report)
}

/// Trains the first model of the roster and sweeps τ over its test scores.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Sweep, HarnessError> {
    let prepared = prepare(config)?;
    let kind = config.models[0];
    let (model, _) = train_selected(config, kind, &prepared)?;
    let test = prepared.test.select(|i| prepared.test.fraction[i] == 1.0);
    let preds = model.predict_batch(&test.x)?;
    let scores: Vec<(f64, bool)> = preds.iter().zip(&test.y).map(|(p, y)| (p.score, p.class_id == *y)).collect();
    let sweep = threshold_sweep(&scores, &tau_grid(config.sweep_step), config.max_fnr);
    if let Some(dir) = &config.output {
        create_dir(dir)?;
        write_file(&dir.join("sweep.csv"), |w| sweep.write_csv(w))?;
        write_file(&dir.join("scores.csv"), |w| sweep.write_scores_csv(w))?;
    }
    Ok(sweep)
}

/// Projection of the experiment's feature rows over all samples. PV-TS rows
/// get one projection per configured completion, each fit on that panel's
/// rows only.
pub fn run_projection(config: &ExperimentConfig) -> Result<Vec<ProjectionRow>, HarnessError> {
    config.validate()?;
    let (samples, _) = load_samples(config)?;
    let all: Vec<&GestureSample> = samples.iter().collect();
    let tagged = evaluation_rows(config.features, &all, &config.completions, None)?;
    let too_few = || HarnessError::Invalid("projection needs at least two rows".into());
    let mut rows = Vec::new();
    if config.features == FeatureSet::PvTs {
        for &f in &config.completions {
            let panel: Vec<FeatureRow> = (0..tagged.rows.len())
                .filter(|&i| tagged.fraction[i] == f)
                .map(|i| tagged.rows[i].clone())
                .collect();
            let mut projected = export_projection(&panel).ok_or_else(too_few)?;
            projected.iter_mut().for_each(|r| r.completion = f);
            rows.extend(projected);
        }
    } else {
        rows = export_projection(&tagged.rows).ok_or_else(too_few)?;
    }
    if let Some(dir) = &config.output {
        create_dir(dir)?;
        write_file(&dir.join("projection.csv"), |w| write_projection_csv(&rows, w))?;
    }
    Ok(rows)
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::fs::File) -> csv::Result<()>) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path).map_err(|source| HarnessError::Output {
        path: path.to_path_buf(),
        source,
    })?;
    f(&mut file)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl Report {
    /// Deterministic report table (no wall times).
    pub fn report_csv(&self) -> String {
        let mut s = String::from(
            "experiment,features,model,params,synthetic,seed,holdout_user,n_train,n_val,n_test,n_test_untrained,train_acc,val_acc,test_acc,test_trained,test_untrained,table\n",
        );
        for m in &self.models {
            let _ = writeln!(
                s,
                "{},{},{},\"{}\",{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},\"{}\"",
                self.name,
                self.features,
                m.model,
                m.params,
                self.synthetic as u8,
                self.seed,
                self.holdout_user.map(|u| u.to_string()).unwrap_or_default(),
                self.n_train,
                self.n_val,
                self.n_test,
                self.n_test_untrained,
                m.train_accuracy,
                m.val_accuracy,
                m.test_accuracy,
                m.test_trained,
                fmt_opt(m.test_untrained),
                m.table_cell(),
            );
        }
        s
    }

    pub fn completion_csv(&self) -> String {
        let mut s = String::from("model,completion,trained,untrained,table\n");
        for m in &self.models {
            for (f, t, u) in &m.by_completion {
                let _ = writeln!(s, "{},{:.2},{:.6},{},\"{}\"", m.model, f, t, fmt_opt(*u), format_pair(*t, *u));
            }
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("model,train_seconds,infer_ms_per_row\n");
        for m in &self.models {
            let _ = writeln!(s, "{},{:.3},{:.4}", m.model, m.train_seconds, m.infer_ms_per_row);
        }
        s
    }

    pub fn confusion_csv(m: &ModelReport) -> String {
        let mut s = String::from("truth");
        for c in &m.confusion.classes {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (c, row) in m.confusion.classes.iter().zip(&m.confusion.confusion) {
            let _ = write!(s, "{c}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        if self.synthetic {
            let _ = writeln!(s, "{SYNTHETIC_BANNER}");
        }
        let _ = writeln!(
            s,
            "{} [{}] seed {} holdout user {}: {} train / {} validation / {} test samples ({} untrained)",
            self.name,
            self.features,
            self.seed,
            self.holdout_user.map(|u| u.to_string()).unwrap_or_else(|| "none".into()),
            self.n_train,
            self.n_val,
            self.n_test,
            self.n_test_untrained
        );
        for m in &self.models {
            let _ = writeln!(s, "  {:<4} test {}  ({})", m.model.to_string(), m.table_cell(), m.params);
            for (f, t, u) in &m.by_completion {
                let _ = writeln!(s, "       at {:.2}: {}", f, format_pair(*t, *u));
            }
        }
        s
    }

    /// Output files as `(name, contents)`, in a fixed order.
    pub fn artifacts(&self) -> Vec<(String, String)> {
        let mut files = vec![
            ("report.csv".to_string(), self.report_csv()),
            ("timing.csv".to_string(), self.timing_csv()),
            ("summary.txt".to_string(), self.summary()),
        ];
        if !self.models.iter().all(|m| m.by_completion.is_empty()) {
            files.push(("completion.csv".to_string(), self.completion_csv()));
        }
        for m in &self.models {
            files.push((format!("confusion_{}.csv", m.model.to_string().to_lowercase()), Self::confusion_csv(m)));
        }
        files
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        create_dir(dir)?;
        for (name, body) in self.artifacts() {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| HarnessError::Output { path, source })?;
        }
        Ok(())
    }
}

/// Accuracy per group key over a tagged set; used by callers who need other
/// groupings than the report's.
pub fn grouped_accuracy(model: &TrainedModel, tagged: &TaggedRows) -> Result<BTreeMap<String, f64>, HarnessError> {
    let groups: Vec<String> = (0..tagged.rows.len())
        .map(|i| {
            format!(
                "{}@{:.2}",
                if tagged.untrained[i] { "untrained" } else { "trained" },
                tagged.fraction[i]
            )
        })
        .collect();
    let m = model.evaluate(&tagged.set(), Some(&groups))?;
    Ok(m.groups.iter().map(|(k, g)| (k.clone(), g.accuracy())).collect())
}
