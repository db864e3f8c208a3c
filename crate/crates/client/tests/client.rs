//! The client against a live server: results over HTTP must match what the
//! core computes in-process.

use gesture_client::{Client, ClientError};
use gesture_core::api::{FeaturesRequest, FramesRequest, RowsRequest, SessionRequest, SynthDatasetRequest};
use gesture_core::config::KvConfig;
use gesture_core::dataset::synth::{replay_stream, SynthDatasetConfig};
use gesture_core::dataset::{GestureKind, GestureSample};
use gesture_core::engine::{Engine, EngineConfig, Session, TaskConfig};
use gesture_core::features::{dg_features, dg_features_at, extract_rows, local_rows, sg_vector, FeatureSet, Timesteps};
use gesture_core::harness::{run_experiment, ExperimentConfig};
use gesture_core::models::{train_model, LabeledSet, ModelKind, ModelSpec, TrainedModel};
use gesture_core::segment::MotionThresholds;
use std::sync::Arc;

async fn client() -> Client {
    let (addr, _handle) = gesture_server::spawn("127.0.0.1:0".parse().unwrap()).await.unwrap();
    Client::new(format!("http://{addr}/"))
}

fn small() -> SynthDatasetConfig {
    SynthDatasetConfig {
        sg_classes: 4,
        sg_users: 2,
        sg_per_class_user: 3,
        dg_classes: 5,
        dg_users: 2,
        dg_per_class_user: 2,
        dg_len: (30, 60),
        ..Default::default()
    }
}

fn knn(set: FeatureSet, samples: &[&GestureSample], steps: Timesteps) -> TrainedModel {
    let rows = extract_rows(set, samples, steps).unwrap();
    let mut m = train_model(&ModelSpec::Knn { k: 3 }, set, &LabeledSet::from_rows(&rows), None, 0).unwrap();
    m.set_class_lengths(&rows);
    m
}

fn split(samples: &[GestureSample]) -> (Vec<&GestureSample>, Vec<&GestureSample>) {
    samples.iter().partition(|s| s.kind == GestureKind::Static)
}

#[tokio::test]
async fn errors_carry_status_and_message() {
    let c = client().await;
    assert!(!c.base().ends_with('/'));
    match c.model("absent").await {
        Err(ClientError::Api { status, message }) => {
            assert_eq!(status.as_u16(), 404);
            assert!(message.contains("absent"));
        }
        other => panic!("expected a 404, got {other:?}"),
    }
}

#[tokio::test]
async fn synthetic_data_is_seeded() {
    let c = client().await;
    let req = SynthDatasetRequest { config: small(), seed: 8 };
    let a = c.synth_dataset(&req).await.unwrap();
    let b = c.synth_dataset(&req).await.unwrap();
    assert_eq!(a, b);
    assert_eq!(a, gesture_core::dataset::synth::synth_dataset(&small(), 8));
}

#[tokio::test]
async fn served_predictions_match_local_ones() {
    let c = client().await;
    let samples = gesture_core::dataset::synth::synth_dataset(&small(), 2);
    let (_, dg) = split(&samples);
    let model = knn(FeatureSet::CiFull, &dg, Timesteps::Last);
    let info = c.import_model(&model).await.unwrap();
    assert_eq!(info.kind, ModelKind::Knn);
    assert_eq!(c.model(&info.id).await.unwrap(), model);

    let rows = extract_rows(FeatureSet::CiFull, &dg, Timesteps::Last).unwrap();
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r.features.values.clone()).collect();
    let served = c.predict(&info.id, values.clone()).await.unwrap();
    assert_eq!(served.predictions, model.predict_batch(&values).unwrap());

    c.delete_model(&info.id).await.unwrap();
    assert!(c.models().await.unwrap().is_empty());
}

#[tokio::test]
async fn served_features_match_local_ones() {
    let c = client().await;
    let samples = gesture_core::dataset::synth::synth_dataset(&small(), 4);
    let (sg, dg) = split(&samples);
    let frames = dg[0].frames.clone();

    let sg_served = c
        .features(&FeaturesRequest { feature_set: FeatureSet::Sg23, frames: sg[0].frames.clone(), j: None })
        .await
        .unwrap();
    assert_eq!(sg_served, sg_vector(sg[0].frames.last().unwrap()));

    for set in [FeatureSet::CiFull, FeatureSet::PvFull, FeatureSet::Raw(10)] {
        let served = c.features(&FeaturesRequest { feature_set: set, frames: frames.clone(), j: None }).await.unwrap();
        assert_eq!(served, dg_features(set, &frames).unwrap(), "{set}");
    }
    let j = frames.len() / 2;
    let served = c
        .features(&FeaturesRequest { feature_set: FeatureSet::PvTs, frames: frames.clone(), j: Some(j) })
        .await
        .unwrap();
    assert_eq!(served, dg_features_at(FeatureSet::PvTs, &local_rows(&frames), j).unwrap());

    let owned: Vec<GestureSample> = dg.iter().map(|s| (*s).clone()).collect();
    let rows = c
        .feature_rows(&RowsRequest { feature_set: FeatureSet::PvTs, samples: owned, steps: Timesteps::TestSubset })
        .await
        .unwrap()
        .rows;
    assert_eq!(rows, extract_rows(FeatureSet::PvTs, &dg, Timesteps::TestSubset).unwrap());
}

#[tokio::test]
async fn chunked_session_matches_a_local_session() {
    let c = client().await;
    let samples = gesture_core::dataset::synth::synth_dataset(&small(), 6);
    let (sg, dg) = split(&samples);
    let sg_model = knn(FeatureSet::Sg23, &sg, Timesteps::Last);
    let dg_model = knn(FeatureSet::PvTs, &dg, Timesteps::All);
    let (stream, _, _) = replay_stream(&dg, 50, 0.01, 3);

    let engine = EngineConfig { provisional_every: 5, ..EngineConfig::default() };
    let mut local = Session::new(
        Engine::new(
            engine.clone(),
            MotionThresholds::default(),
            Some(Arc::new(sg_model.clone())),
            Some(Arc::new(dg_model.clone())),
        )
        .unwrap(),
        TaskConfig::default(),
    );
    let mut want = Vec::new();
    let mut want_cmds = Vec::new();
    for f in &stream.frames {
        let out = local.push_frame(*f).unwrap();
        want.extend(out.events);
        want_cmds.extend(out.commands);
    }
    let out = local.finish().unwrap();
    want.extend(out.events);
    want_cmds.extend(out.commands);
    assert!(want.iter().any(|e| e.kind == GestureKind::Dynamic));

    let req = SessionRequest {
        sg_model: Some(c.import_model(&sg_model).await.unwrap().id),
        dg_model: Some(c.import_model(&dg_model).await.unwrap().id),
        engine,
        thresholds: MotionThresholds::default(),
        task: TaskConfig::default(),
    };
    let session = c.create_session(&req).await.unwrap();
    let mut got = Vec::new();
    let mut got_cmds = Vec::new();
    for batch in stream.frames.chunks(97) {
        let resp = c.push_frames(&session.id, &FramesRequest { frames: batch.to_vec(), motion: None }).await.unwrap();
        assert_eq!(resp.frame_ms.len(), batch.len());
        got.extend(resp.output.events);
        got_cmds.extend(resp.output.commands);
    }
    let tail = c.finish_session(&session.id).await.unwrap();
    assert!(tail.session.finished);
    assert_eq!(tail.session.frames_seen, stream.frames.len());
    got.extend(tail.output.events);
    got_cmds.extend(tail.output.commands);

    assert_eq!(got, want);
    // Latencies include wall time, so only the index and command must agree.
    let key = |v: &[gesture_core::engine::CommandRecord]| v.iter().map(|r| (r.index, r.command)).collect::<Vec<_>>();
    assert_eq!(key(&got_cmds), key(&want_cmds));
    c.delete_session(&session.id).await.unwrap();
}

#[tokio::test]
async fn remote_experiment_matches_a_local_run() {
    let c = client().await;
    let dir = tempfile::tempdir().unwrap();
    let samples = gesture_core::dataset::synth::synth_dataset(&small(), 9);
    gesture_core::dataset::write_dataset(dir.path(), &samples).unwrap();
    let text = format!(
        "name = remote\nfeatures = CI-FULL\nmodels = knn, rf\ndataset = {}\nseed = 4\noutput = {}\n",
        dir.path().display(),
        dir.path().join("out").display()
    );
    let resp = c.run_experiment(&text).await.unwrap();
    // The server hands files back instead of writing them.
    assert!(!dir.path().join("out").exists());
    let names: Vec<&str> = resp.files.iter().map(|f| f.name.as_str()).collect();
    assert!(names.contains(&"report.csv") && names.contains(&"summary.txt"), "{names:?}");

    let mut cfg = ExperimentConfig::from_kv(&KvConfig::parse(&text).unwrap()).unwrap();
    cfg.output = None;
    let local = run_experiment(&cfg).unwrap();
    assert_eq!(resp.report.models.len(), local.models.len());
    for (r, l) in resp.report.models.iter().zip(&local.models) {
        assert_eq!(r.model, l.model);
        assert_eq!(r.test_trained, l.test_trained);
        assert_eq!(r.test_untrained, l.test_untrained);
    }

    let trained = c.train(&text, ModelKind::Knn).await.unwrap();
    let ev = c.evaluate(&trained.id, &text).await.unwrap();
    let knn = local.models.iter().find(|m| m.model == ModelKind::Knn).unwrap();
    assert_eq!(ev.test_trained, knn.test_trained);
}
