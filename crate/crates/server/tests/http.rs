//! Status codes and bodies of the HTTP surface, exercised with a plain HTTP
//! client against a server on a loopback port.

use gesture_core::api::{ErrorBody, Health, ModelInfo, SessionInfo};
use gesture_core::dataset::synth::{synth_dataset, SynthDatasetConfig};
use gesture_core::dataset::{Frame, GestureKind};
use gesture_core::features::{extract_rows, FeatureSet, Timesteps};
use gesture_core::models::{train_model, LabeledSet, ModelSpec};
use reqwest::StatusCode;
use serde_json::{json, Value};

async fn start() -> String {
    let (addr, _handle) = gesture_server::spawn("127.0.0.1:0".parse().unwrap()).await.unwrap();
    format!("http://{addr}")
}

async fn error_of(resp: reqwest::Response) -> (StatusCode, String) {
    let status = resp.status();
    let body: ErrorBody = resp.json().await.expect("JSON error body");
    (status, body.error)
}

fn sg_model_json() -> String {
    let cfg = SynthDatasetConfig {
        sg_classes: 3,
        sg_users: 2,
        sg_per_class_user: 2,
        dg_classes: 2,
        dg_users: 1,
        dg_per_class_user: 1,
        ..Default::default()
    };
    let samples = synth_dataset(&cfg, 5);
    let sg: Vec<_> = samples.iter().filter(|s| s.kind == GestureKind::Static).collect();
    let rows = extract_rows(FeatureSet::Sg23, &sg, Timesteps::Last).unwrap();
    train_model(&ModelSpec::Knn { k: 1 }, FeatureSet::Sg23, &LabeledSet::from_rows(&rows), None, 0)
        .unwrap()
        .to_json()
        .unwrap()
}

#[tokio::test]
async fn health_reports_the_crate_version() {
    let base = start().await;
    let h: Health = reqwest::get(format!("{base}/healthz")).await.unwrap().json().await.unwrap();
    assert_eq!(h.status, "ok");
    assert_eq!(h.version, env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn unknown_ids_are_404_with_an_error_body() {
    let base = start().await;
    let http = reqwest::Client::new();
    for path in ["/v1/models/nope", "/v1/sessions/nope"] {
        let (status, msg) = error_of(http.get(format!("{base}{path}")).send().await.unwrap()).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{path}");
        assert!(msg.contains("nope"), "{msg}");
    }
    let resp = http.delete(format!("{base}/v1/models/nope")).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_experiment_text_is_a_client_error() {
    let base = start().await;
    let http = reqwest::Client::new();
    let resp = http
        .post(format!("{base}/v1/harness/run"))
        .json(&json!({ "config": "this line has no equals sign" }))
        .send()
        .await
        .unwrap();
    let (status, msg) = error_of(resp).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(msg.contains("key = value"), "{msg}");

    let resp = http
        .post(format!("{base}/v1/harness/run"))
        .json(&json!({ "config": "features = NOPE" }))
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_client_error());
}

#[tokio::test]
async fn model_import_round_trips_and_rejects_garbage() {
    let base = start().await;
    let http = reqwest::Client::new();
    let text = sg_model_json();
    let resp = http.post(format!("{base}/v1/models/import")).body(text.clone()).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let info: ModelInfo = resp.json().await.unwrap();
    assert_eq!(info.feature_set, FeatureSet::Sg23);
    assert_eq!(info.classes, vec![1, 2, 3]);

    let listed: Vec<ModelInfo> = http.get(format!("{base}/v1/models")).send().await.unwrap().json().await.unwrap();
    assert_eq!(listed, vec![info.clone()]);

    let back: Value = http.get(format!("{base}/v1/models/{}", info.id)).send().await.unwrap().json().await.unwrap();
    let orig: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(back, orig);

    let resp = http.post(format!("{base}/v1/models/import")).body("{\"not\": 1}").send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);

    // Wrong row width for the model's schema.
    let resp = http
        .post(format!("{base}/v1/models/{}/predict", info.id))
        .json(&json!({ "rows": [[1.0, 2.0]] }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);

    let resp = http.delete(format!("{base}/v1/models/{}", info.id)).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::NO_CONTENT);
}

#[tokio::test]
async fn finished_sessions_refuse_frames() {
    let base = start().await;
    let http = reqwest::Client::new();
    let info: ModelInfo = http
        .post(format!("{base}/v1/models/import"))
        .body(sg_model_json())
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let resp = http
        .post(format!("{base}/v1/sessions"))
        .json(&json!({ "sg_model": info.id }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let session: SessionInfo = resp.json().await.unwrap();

    let frames: Vec<Frame> = (0..10).map(|i| Frame::zeros(i as f64 * 0.01)).collect();
    let url = format!("{base}/v1/sessions/{}/frames", session.id);
    let resp = http
        .post(&url)
        .json(&json!({ "frames": frames, "motion": [true, false] }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    let body: Value = http.post(&url).json(&json!({ "frames": frames })).send().await.unwrap().json().await.unwrap();
    assert_eq!(body["frame_ms"].as_array().unwrap().len(), 10);
    assert_eq!(body["session"]["frames_seen"], 10);

    let resp = http.post(format!("{base}/v1/sessions/{}/finish", session.id)).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let (status, _) = error_of(http.post(&url).json(&json!({ "frames": frames })).send().await.unwrap()).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn sessions_need_a_known_model() {
    let base = start().await;
    let resp = reqwest::Client::new()
        .post(format!("{base}/v1/sessions"))
        .json(&json!({ "dg_model": "missing" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn segment_reports_runs_of_a_given_mask() {
    let base = start().await;
    let frames: Vec<Frame> = (0..60).map(|i| Frame::zeros(i as f64 * 0.01)).collect();
    let mask: Vec<bool> = (0..60).map(|i| (10..40).contains(&i)).collect();
    let body: Value = reqwest::Client::new()
        .post(format!("{base}/v1/segment"))
        .json(&json!({ "frames": frames, "mask": mask }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let segs = body["segments"].as_array().unwrap();
    let dg: Vec<&Value> = segs.iter().filter(|s| s["kind"] == "Dynamic" || s["kind"] == "D").collect();
    assert_eq!(dg.len(), 1, "{body}");
    assert_eq!(dg[0]["start"], 10);
    assert_eq!(dg[0]["len"], 30);
}
