use std::time::Duration;

use apfit_core::model::{reference_params, ModelId, ModelOptions};
use apfit_core::simulator::{sample_alignment_window, Protocol};
use apfit_core::StimulusConfig;
use apfit_service::{router, ServiceConfig};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(max_jobs: usize) -> Router {
    router(ServiceConfig {
        max_concurrent_jobs: max_jobs,
        threads: Some(1),
    })
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn send_json(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, bytes) = send(app, method, uri, body).await;
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn ms_samples(cl: f64) -> Vec<f64> {
    let pacing = Protocol::default().pacing(cl);
    sample_alignment_window(
        ModelId::Ms,
        &reference_params(ModelId::Ms),
        &StimulusConfig::default(),
        &pacing,
        0,
        &ModelOptions::default(),
    )
    .unwrap()
    .samples
}

fn ms_config(particles: usize, iterations: usize, seed: u64) -> Value {
    json!({
        "model": "ms",
        "datasets": [{ "kind": "voltage", "samples": ms_samples(300.0), "cycle_length": 300.0 }],
        "normalize_to": 0.0,
        "hyper": { "particles": particles, "iterations": iterations },
        "seed": seed,
    })
}

async fn submit(app: &Router, config: Value) -> String {
    let (status, body) = send_json(app, "POST", "/fits", Some(config)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    body["job_id"].as_str().unwrap().to_string()
}

async fn wait_for(app: &Router, id: &str, done: impl Fn(&Value) -> bool) -> Value {
    for _ in 0..6000 {
        let (status, record) = send_json(app, "GET", &format!("/fits/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if done(&record) {
            return record;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job {id} did not reach the expected state");
}

fn terminal(record: &Value) -> bool {
    matches!(
        record["status"].as_str(),
        Some("done" | "failed" | "cancelled")
    )
}

#[tokio::test]
async fn model_catalog() {
    let app = app(1);
    let (status, models) = send_json(&app, "GET", "/models", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(models.as_array().unwrap().len(), 6);

    let (status, ms) = send_json(&app, "GET", "/models/ms/defaults", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<_> = ms["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(
        names,
        ["tau_in", "tau_out", "tau_close", "tau_open", "v_gate"]
    );
    assert_eq!(ms["parameters"][2]["min"], 75.0);
    assert_eq!(ms["parameters"][2]["max"], 300.0);
    assert_eq!(ms["stimulus"]["kind"], "square");
    assert!(ms["hyper"]["particles"].as_u64().is_some());

    let (status, _) = send_json(&app, "GET", "/models/xyz/defaults", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send_json(&app, "GET", "/fits/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_configs_are_rejected_with_field_paths() {
    let app = app(1);
    let mut config = ms_config(8, 2, 1);
    config["parameters"] = json!({ "tau_close": { "min": 300.0, "max": 75.0 } });
    let (status, body) = send_json(&app, "POST", "/fits", Some(config)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let paths: Vec<_> = body["errors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap().to_string())
        .collect();
    assert!(paths.iter().any(|p| p.contains("tau_close")), "{paths:?}");

    let (status, bytes) = {
        let request = Request::post("/fits")
            .header("content-type", "application/json")
            .body(Body::from("{not json"))
            .unwrap();
        let response = app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        (
            status,
            response.into_body().collect().await.unwrap().to_bytes(),
        )
    };
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(body["errors"][0]["path"], "body");

    let (status, _) = send_json(
        &app,
        "POST",
        "/fits",
        Some(json!({ "model": "ms", "datasets": [] })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn job_runs_to_completion_and_exports() {
    let app = app(1);
    let id = submit(&app, ms_config(16, 5, 3)).await;
    let record = wait_for(&app, &id, terminal).await;
    assert_eq!(record["status"], "done");
    let history = record["result"]["history"].as_array().unwrap();
    assert_eq!(history.len(), 6);
    assert_eq!(&record["progress"], &record["result"]["history"]);
    assert_eq!(record["config"]["seed"], 3);

    let (status, params) = send(&app, "GET", &format!("/fits/{id}/exports/parameters"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(params).unwrap().lines().count(), 5);
    let (status, conv) = send(
        &app,
        "GET",
        &format!("/fits/{id}/exports/convergence"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(conv).unwrap().lines().count(), 1 + 6);
    let (status, trace) = send(&app, "GET", &format!("/fits/{id}/exports/trace"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(trace).unwrap().lines().count(), 1 + 300);
    let (status, details) =
        send_json(&app, "GET", &format!("/fits/{id}/exports/details"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(details["seed"], 3);
    let (status, _) = send(&app, "GET", &format!("/fits/{id}/exports/other"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, list) = send_json(&app, "GET", "/fits", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn missing_seed_is_drawn_fresh() {
    let app = app(1);
    let mut config = ms_config(1, 1, 0);
    config.as_object_mut().unwrap().remove("seed");
    let a = submit(&app, config.clone()).await;
    let b = submit(&app, config).await;
    let ra = wait_for(&app, &a, terminal).await;
    let rb = wait_for(&app, &b, terminal).await;
    assert_ne!(ra["config"]["seed"], rb["config"]["seed"]);
}

#[tokio::test]
async fn cancel_keeps_partial_history() {
    let app = app(1);
    let id = submit(&app, ms_config(32, 100_000, 5)).await;
    wait_for(&app, &id, |r| {
        r["progress"].as_array().is_some_and(|p| p.len() >= 3)
    })
    .await;
    let (status, _) = send_json(&app, "POST", &format!("/fits/{id}/cancel"), None).await;
    assert_eq!(status, StatusCode::OK);
    let record = wait_for(&app, &id, terminal).await;
    assert_eq!(record["status"], "cancelled");
    let history = record["result"]["history"].as_array().unwrap();
    assert!(history.len() >= 3 && history.len() < 100_001);
    assert_eq!(&record["progress"], &record["result"]["history"]);
    let (status, _) = send(&app, "GET", &format!("/fits/{id}/exports/parameters"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn queued_job_cancels_immediately() {
    let app = app(1);
    let running = submit(&app, ms_config(32, 100_000, 5)).await;
    let queued = submit(&app, ms_config(8, 3, 6)).await;
    let (_, body) = send_json(&app, "POST", &format!("/fits/{queued}/cancel"), None).await;
    assert_eq!(body["status"], "cancelled");
    let (status, _) = send(
        &app,
        "GET",
        &format!("/fits/{queued}/exports/parameters"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    send_json(&app, "POST", &format!("/fits/{running}/cancel"), None).await;
    wait_for(&app, &running, terminal).await;
    let record = wait_for(&app, &queued, terminal).await;
    assert_eq!(record["status"], "cancelled");
    assert!(record["result"].is_null());
}

fn parse_events(text: &str) -> Vec<(String, Value)> {
    let mut events = Vec::new();
    for block in text.split("\n\n") {
        let mut name = None;
        let mut data = None;
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                data = Some(serde_json::from_str(v.trim()).unwrap());
            }
        }
        if let (Some(n), Some(d)) = (name, data) {
            events.push((n, d));
        }
    }
    events
}

#[tokio::test]
async fn progress_stream_matches_history() {
    let app = app(1);
    let id = submit(&app, ms_config(16, 8, 11)).await;
    let (status, bytes) = send(&app, "GET", &format!("/fits/{id}/progress"), None).await;
    assert_eq!(status, StatusCode::OK);
    let events = parse_events(&String::from_utf8(bytes).unwrap());
    let record = wait_for(&app, &id, terminal).await;
    let history: Vec<f64> = record["result"]["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let (last, progress) = events.split_last().unwrap();
    assert_eq!(last.0, "status");
    assert_eq!(last.1["status"], "done");
    assert_eq!(progress.len(), history.len());
    for (k, (name, data)) in progress.iter().enumerate() {
        assert_eq!(name, "progress");
        assert_eq!(data["iteration"], k);
        assert_eq!(
            data["lowest_error"].as_f64().unwrap().to_bits(),
            history[k].to_bits()
        );
    }

    // replay after completion yields the same events
    let (_, bytes) = send(&app, "GET", &format!("/fits/{id}/progress"), None).await;
    assert_eq!(parse_events(&String::from_utf8(bytes).unwrap()), events);
}

#[tokio::test]
async fn concurrent_jobs_are_reproducible() {
    let app = app(2);
    let a = submit(&app, ms_config(24, 4, 21)).await;
    let b = submit(&app, ms_config(24, 4, 21)).await;
    let ra = wait_for(&app, &a, terminal).await;
    let rb = wait_for(&app, &b, terminal).await;
    assert_eq!(ra["status"], "done");
    assert_eq!(ra["result"]["best_params"], rb["result"]["best_params"]);
    assert_eq!(ra["result"]["history"], rb["result"]["history"]);
}

#[tokio::test]
async fn preflight_gets_cors_headers() {
    let app = app(1);
    let request = Request::builder()
        .method("OPTIONS")
        .uri("/fits")
        .body(Body::empty())
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::NO_CONTENT);
    assert_eq!(response.headers()["access-control-allow-origin"], "*");
}
