use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n_per: usize, classes: u32, dim: usize, spread: f64, seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = LabeledSet::default();
    for c in 0..classes {
        let centre: Vec<f64> = (0..dim).map(|k| ((c as usize * 7 + k * 3) % 5) as f64 * 2.0).collect();
        for _ in 0..n_per {
            set.x.push(centre.iter().map(|m| m + spread * (rng.random::<f64>() - 0.5)).collect());
            set.y.push(c * 10 + 1);
        }
    }
    set
}

fn small_net(hidden: Vec<LayerSpec>) -> MlpConfig {
    MlpConfig {
        hidden,
        learning_rate: 0.05,
        batch_size: 8,
        l2: 0.005,
        weight_decay: 1e-7,
        max_epochs: 200,
        patience: 10,
    }
}

fn raw_set(dim: usize) -> FeatureSet {
    FeatureSet::Raw(dim / 28)
}

#[test]
fn separable_two_class_reaches_full_train_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..80 {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        if (a + b).abs() < 0.2 {
            continue;
        }
        x.push(vec![a, b]);
        y.push(if a + b > 0.0 { 1 } else { 0 });
    }
    let xm = to_matrix(&x);
    let mut net = Mlp::new(2, 2, small_net(vec![LayerSpec::dense(16)]), 1).unwrap();
    net.fit(&xm, &y, None, 1).unwrap();
    assert!(net.log.len() <= 200);
    let p = net.predict_proba_batch(xm.view());
    let hits = p
        .rows()
        .into_iter()
        .zip(&y)
        .filter(|(r, c)| argmax(&r.to_vec()) == **c)
        .count();
    assert_eq!(hits, y.len());
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
    let y = vec![0, 2, 1, 1, 0, 2];
    let cfg = small_net(vec![LayerSpec::dense(5).noise(0.5).dropout(0.3), LayerSpec::dense(3)]);
    let mut net = Mlp::new(4, 3, cfg, 7).unwrap();
    // Shift biases so no pre-activation sits on the ReLU kink.
    for l in &mut net.layers {
        l.b.mapv_inplace(|_| 0.05);
    }
    let (_, grad) = net.loss_and_gradient(x.view(), &y);
    let p0 = net.flat_params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] += h;
        net.set_flat_params(&p);
        let up = net.loss(x.view(), &y);
        p[i] -= 2.0 * h;
        net.set_flat_params(&p);
        let down = net.loss(x.view(), &y);
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn first_epoch_lowers_loss() {
    let data = blobs(20, 3, 4, 1.0, 5);
    let x = to_matrix(&data.x);
    let y: Vec<usize> = data.y.iter().map(|c| (*c / 10) as usize).collect();
    let mut cfg = small_net(vec![LayerSpec::dense(8)]);
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 1;
    let mut net = Mlp::new(4, 3, cfg, 2).unwrap();
    let before = net.loss(x.view(), &y);
    net.fit(&x, &y, None, 2).unwrap();
    assert!(net.loss(x.view(), &y) < before);
}

#[test]
fn early_stopping_restores_best() {
    let train = blobs(15, 3, 5, 6.0, 8);
    let val = blobs(10, 3, 5, 6.0, 9);
    let mut cfg = small_net(vec![LayerSpec::dense(32)]);
    cfg.learning_rate = 0.2;
    cfg.patience = 3;
    let m = train_model(&ModelSpec::Ann(cfg), raw_set(28), &pad(&train, 28), Some(&pad(&val, 28)), 4).unwrap();
    let Classifier::Ann(net) = &m.model else { unreachable!() };
    let best = net.log[net.best_epoch - 1].val_loss.unwrap();
    let last = net.log.last().unwrap().val_loss.unwrap();
    assert!(best <= last);
    let min = net.log.iter().filter_map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best, min);
}

#[test]
fn huge_learning_rate_diverges() {
    let data = blobs(10, 2, 3, 1.0, 1);
    let x = to_matrix(&data.x).mapv(|v| v * 1e3);
    let y: Vec<usize> = data.y.iter().map(|c| (*c / 10) as usize).collect();
    let mut cfg = small_net(vec![LayerSpec::dense(8)]);
    cfg.learning_rate = 1e12;
    let mut net = Mlp::new(3, 2, cfg, 0).unwrap();
    assert!(matches!(net.fit(&x, &y, None, 0), Err(ModelError::Diverged { .. })));
}

fn pad(set: &LabeledSet, dim: usize) -> LabeledSet {
    LabeledSet {
        x: set
            .x
            .iter()
            .map(|r| {
                let mut v = r.clone();
                v.resize(dim, 0.0);
                v
            })
            .collect(),
        y: set.y.clone(),
    }
}

#[test]
fn knn_self_lookup_and_k_bounds() {
    let data = blobs(10, 3, 4, 1.0, 2);
    let ys: Vec<usize> = data.y.iter().map(|c| (*c / 10) as usize).collect();
    let m = Knn::fit(&data.x, &ys, 3, 1).unwrap();
    for (x, y) in data.x.iter().zip(&ys) {
        let p = m.predict_proba(x);
        assert_eq!(p[*y], 1.0);
    }
    assert!(Knn::fit(&data.x, &ys, 3, 31).is_err());
    assert!(Knn::fit(&data.x, &ys, 3, 0).is_err());
}

#[test]
fn knn_partial_distance_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x: Vec<Vec<f64>> = (0..400).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // Repeated rows create exact distance ties.
    let mut x = x;
    for i in 0..40 {
        let r = x[i].clone();
        x.push(r);
    }
    let y: Vec<usize> = (0..x.len()).map(|i| i % 4).collect();
    let m = Knn::fit(&x, &y, 4, 5).unwrap();
    for q in 0..1000 {
        let query: Vec<f64> = if q % 10 == 0 {
            x[q % x.len()].clone()
        } else {
            (0..6).map(|_| rng.random_range(-1.2..1.2)).collect()
        };
        assert_eq!(m.neighbors(&query), m.neighbors_brute(&query));
    }
}

#[test]
fn forest_single_tree_is_one_hot_on_training_points() {
    let data = blobs(12, 4, 3, 3.0, 6);
    let ys: Vec<usize> = data.y.iter().map(|c| (*c / 10) as usize).collect();
    let cfg = RfConfig {
        n_trees: 1,
        bootstrap: false,
        ..RfConfig::default()
    };
    let f = RandomForest::fit(&data.x, &ys, 4, &cfg, 1).unwrap();
    for (x, y) in data.x.iter().zip(&ys) {
        let p = f.predict_proba(x);
        assert_eq!(p[*y], 1.0);
    }
    let leaf_total: u32 = f.trees[0].leaves().map(|l| l.iter().sum::<u32>()).sum();
    assert_eq!(leaf_total as usize, data.x.len());
}

#[test]
fn forest_constant_labels_and_determinism() {
    let data = blobs(30, 1, 3, 3.0, 6);
    let ys = vec![0usize; data.x.len()];
    let f = RandomForest::fit(&data.x, &ys, 1, &RfConfig { n_trees: 5, ..Default::default() }, 3).unwrap();
    assert!(data.x.iter().all(|x| f.predict_proba(x) == vec![1.0]));

    let data = blobs(20, 3, 5, 4.0, 6);
    let ys: Vec<usize> = data.y.iter().map(|c| (*c / 10) as usize).collect();
    let cfg = RfConfig { n_trees: 8, ..Default::default() };
    let a = RandomForest::fit(&data.x, &ys, 3, &cfg, 42).unwrap();
    let b = RandomForest::fit(&data.x, &ys, 3, &cfg, 42).unwrap();
    assert_eq!(a, b);
    for t in &a.trees {
        // bootstrap draws n rows per tree
        let total: u32 = t.leaves().map(|l| l.iter().sum::<u32>()).sum();
        assert_eq!(total as usize, data.x.len());
    }
}

#[test]
fn metrics_perfect_and_random() {
    let classes: Vec<u32> = (0..10).collect();
    let truth: Vec<u32> = (0..1000).map(|i| (i % 10) as u32).collect();
    let m = Metrics::from_predictions(&classes, &truth, &truth, None);
    assert_eq!(m.accuracy, 1.0);
    for (i, row) in m.confusion.iter().enumerate() {
        assert_eq!(row.iter().sum::<usize>(), row[i]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let guess: Vec<u32> = (0..1000).map(|_| rng.random_range(0..10)).collect();
    let groups: Vec<String> = (0..1000).map(|i| if i < 500 { "trained" } else { "untrained" }.to_string()).collect();
    let m = Metrics::from_predictions(&classes, &truth, &guess, Some(&groups));
    assert!((m.accuracy - 0.1).abs() <= 0.03, "{}", m.accuracy);
    assert_eq!(m.confusion.iter().flatten().sum::<usize>(), 1000);
    assert_eq!(m.groups["trained"].total, 500);
    assert_eq!(format_pair(0.946, Some(0.879)), "94.6 (87.9)");
}

#[test]
fn container_round_trip_and_schema_check() {
    let data = pad(&blobs(10, 3, 4, 2.0, 1), 28);
    for kind in ModelKind::ALL {
        let spec = match kind {
            ModelKind::Ann => ModelSpec::Ann(small_net(vec![LayerSpec::dense(6)])),
            ModelKind::Knn => ModelSpec::Knn { k: 3 },
            ModelKind::Rf => ModelSpec::Rf(RfConfig { n_trees: 4, ..Default::default() }),
        };
        let m = train_model(&spec, FeatureSet::PvFull, &data, Some(&data), 5).unwrap();
        assert_eq!(m.classes, vec![1, 11, 21]);
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        let z = FeatureVector::new(FeatureSchema::Pv28, data.x[4].clone()).unwrap();
        assert_eq!(back.predict_proba(&z).unwrap(), m.predict_proba(&z).unwrap());
        let wrong = FeatureVector::new(FeatureSchema::Raw(1), data.x[4].clone()).unwrap();
        assert!(matches!(m.predict_proba(&wrong), Err(ModelError::Schema { .. })));
        let acc = m.evaluate(&data, None).unwrap().accuracy;
        assert!(acc > 0.9, "{kind} {acc}");
    }
}

#[test]
fn wrong_version_is_rejected() {
    let data = pad(&blobs(5, 2, 2, 1.0, 1), 28);
    let m = train_model(&ModelSpec::Knn { k: 1 }, FeatureSet::PvFull, &data, None, 0).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
    v["version"] = 99.into();
    assert!(matches!(TrainedModel::from_json(&v.to_string()), Err(ModelError::Version(99))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn probabilities_are_distributions(q in proptest::collection::vec(-1e6f64..1e6, 28)) {
        let data = pad(&blobs(6, 3, 4, 2.0, 2), 28);
        use std::sync::OnceLock;
        static MODELS: OnceLock<Vec<TrainedModel>> = OnceLock::new();
        let models = MODELS.get_or_init(|| {
            [
                ModelSpec::Ann(small_net(vec![LayerSpec::dense(6)])),
                ModelSpec::Knn { k: 3 },
                ModelSpec::Rf(RfConfig { n_trees: 3, ..Default::default() }),
            ]
            .iter()
            .map(|s| train_model(s, FeatureSet::PvFull, &data, None, 1).unwrap())
            .collect()
        });
        for m in models {
            let p = m.predict_proba_values(&q).unwrap();
            prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
