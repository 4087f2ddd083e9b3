//! HTTP service exposing the model catalog, fit jobs and live progress.
//!
//! Jobs live in memory only and are lost when the process exits.

mod jobs;

use std::convert::Infallible;
use std::sync::Arc;

use apfit_core::model::{model_spec, reference_params, ModelId};
use apfit_core::orchestrator::{
    build_job, export_convergence_csv, export_parameters, export_run_details, export_trace_csv,
    FieldError, FitConfig,
};
use apfit_core::{PsoHyper, StimulusConfig};
use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::Next;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Serialize;
use serde_json::{json, Value};

pub use jobs::{Job, JobRecord, JobState, JobStatus, Registry};

/// Runtime settings of the service.
#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    /// Number of fits allowed to run at the same time.
    pub max_concurrent_jobs: usize,
    /// Worker threads per fit; all cores when `None`.
    pub threads: Option<usize>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_concurrent_jobs: 1,
            threads: None,
        }
    }
}

pub fn router(config: ServiceConfig) -> Router {
    let registry = Registry::new(config.max_concurrent_jobs, config.threads);
    Router::new()
        .route("/models", get(list_models))
        .route("/models/{id}/defaults", get(model_defaults))
        .route("/fits", post(submit_fit).get(list_fits))
        .route("/fits/{id}", get(get_fit))
        .route("/fits/{id}/progress", get(progress_stream))
        .route("/fits/{id}/cancel", post(cancel_fit))
        .route("/fits/{id}/exports/{kind}", get(export))
        .layer(axum::middleware::from_fn(allow_any_origin))
        .with_state(registry)
}

async fn allow_any_origin(request: Request, next: Next) -> Response {
    let mut response = if request.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(request).await
    };
    let headers = response.headers_mut();
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_ORIGIN,
        HeaderValue::from_static("*"),
    );
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_HEADERS,
        HeaderValue::from_static("content-type"),
    );
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_METHODS,
        HeaderValue::from_static("GET, POST, OPTIONS"),
    );
    response
}

#[derive(Debug)]
enum ApiError {
    NotFound(String),
    Invalid(Vec<FieldError>),
    Conflict(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::NotFound(what) => (
                StatusCode::NOT_FOUND,
                Json(json!({ "error": format!("{what} not found") })),
            )
                .into_response(),
            ApiError::Invalid(errors) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(json!({ "errors": errors })),
            )
                .into_response(),
            ApiError::Conflict(message) => {
                (StatusCode::CONFLICT, Json(json!({ "error": message }))).into_response()
            }
        }
    }
}

fn find_job(registry: &Registry, id: &str) -> Result<Arc<Job>, ApiError> {
    registry
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("job '{id}'")))
}

#[derive(Serialize)]
struct ModelSummary {
    id: &'static str,
    name: &'static str,
    parameters: usize,
}

async fn list_models() -> Json<Vec<ModelSummary>> {
    Json(
        ModelId::ALL
            .into_iter()
            .map(|id| ModelSummary {
                id: id.key(),
                name: id.display_name(),
                parameters: model_spec(id).len(),
            })
            .collect(),
    )
}

#[derive(Serialize)]
struct ParameterDefaults {
    name: &'static str,
    symbol: &'static str,
    min: f64,
    max: f64,
    value: f64,
}

#[derive(Serialize)]
struct ModelDefaults {
    id: &'static str,
    name: &'static str,
    parameters: Vec<ParameterDefaults>,
    normalize_to: f64,
    stimulus: StimulusConfig,
    biphasic_stimulus: StimulusConfig,
    hyper: PsoHyper,
}

async fn model_defaults(Path(id): Path<String>) -> Result<Json<ModelDefaults>, ApiError> {
    let model: ModelId = id
        .parse()
        .map_err(|_| ApiError::NotFound(format!("model '{id}'")))?;
    let spec = model_spec(model);
    let reference = reference_params(model);
    Ok(Json(ModelDefaults {
        id: model.key(),
        name: model.display_name(),
        parameters: spec
            .parameters
            .iter()
            .zip(reference.values())
            .map(|(p, &value)| ParameterDefaults {
                name: p.name,
                symbol: p.symbol,
                min: p.min,
                max: p.max,
                value,
            })
            .collect(),
        normalize_to: spec.default_normalize_to,
        stimulus: StimulusConfig::default_square(),
        biphasic_stimulus: StimulusConfig::default_biphasic(),
        hyper: PsoHyper::default(),
    }))
}

/// Reads a config from the request body. A body without a `seed` gets a
/// fresh random one so repeated submissions explore different swarms.
fn parse_config(body: &[u8]) -> Result<FitConfig, ApiError> {
    let body_error = |message: String| {
        ApiError::Invalid(vec![FieldError {
            path: "body".into(),
            message,
        }])
    };
    let mut value: Value =
        serde_json::from_slice(body).map_err(|e| body_error(format!("invalid JSON: {e}")))?;
    let Some(object) = value.as_object_mut() else {
        return Err(body_error("expected a JSON object".into()));
    };
    if !object.contains_key("seed") {
        let seed = uuid::Uuid::new_v4().as_u64_pair().0;
        object.insert("seed".into(), json!(seed));
    }
    serde_json::from_value(value).map_err(|e| body_error(e.to_string()))
}

async fn submit_fit(State(registry): State<Registry>, body: Bytes) -> Result<Response, ApiError> {
    let config = parse_config(&body)?;
    let job = build_job(&config).map_err(|e| ApiError::Invalid(e.0))?;
    let record = registry.submit(job);
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": record.id }))).into_response())
}

#[derive(Serialize)]
struct JobSummary {
    job_id: String,
    status: JobStatus,
    model: ModelId,
}

async fn list_fits(State(registry): State<Registry>) -> Json<Vec<JobSummary>> {
    Json(
        registry
            .list()
            .into_iter()
            .map(|job| JobSummary {
                job_id: job.id.clone(),
                status: job.state().status,
                model: job.config.model,
            })
            .collect(),
    )
}

async fn get_fit(
    State(registry): State<Registry>,
    Path(id): Path<String>,
) -> Result<Json<JobRecord>, ApiError> {
    Ok(Json(find_job(&registry, &id)?.record()))
}

async fn cancel_fit(
    State(registry): State<Registry>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let job = find_job(&registry, &id)?;
    let status = job.cancel();
    Ok(Json(json!({ "job_id": job.id, "status": status })))
}

fn progress_event(iteration: usize, lowest_error: f64) -> Event {
    Event::default()
        .event("progress")
        .json_data(json!({ "iteration": iteration, "lowest_error": lowest_error }))
        .expect("progress payload serializes")
}

/// Replays the history recorded so far, then follows the job until it
/// reaches a terminal status and closes with a `status` event.
fn follow(job: Arc<Job>) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = job.subscribe();
    stream::unfold(
        (job, rx, 0usize, false),
        |(job, mut rx, sent, finished)| async move {
            if finished {
                return None;
            }
            loop {
                rx.borrow_and_update();
                let (status, fresh) = job.progress_since(sent);
                if !fresh.is_empty() {
                    let events: Vec<_> = fresh
                        .iter()
                        .enumerate()
                        .map(|(k, &e)| Ok(progress_event(sent + k, e)))
                        .collect();
                    let sent = sent + fresh.len();
                    return Some((stream::iter(events), (job, rx, sent, false)));
                }
                if status.is_terminal() {
                    let event = Event::default()
                        .event("status")
                        .json_data(json!({ "status": status }))
                        .expect("status payload serializes");
                    return Some((stream::iter(vec![Ok(event)]), (job, rx, sent, true)));
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    )
    .flatten()
}

async fn progress_stream(
    State(registry): State<Registry>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let job = find_job(&registry, &id)?;
    Ok(Sse::new(follow(job)).keep_alive(KeepAlive::default()))
}

async fn export(
    State(registry): State<Registry>,
    Path((id, kind)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let job = find_job(&registry, &id)?;
    let state = job.state();
    let Some(result) = state.result else {
        return Err(ApiError::Conflict(format!(
            "job '{id}' has no result yet (status {:?})",
            state.status
        )));
    };
    let (content_type, filename, body) = match kind.as_str() {
        "parameters" => (
            "text/tab-separated-values",
            "parameters.tsv",
            export_parameters(&result),
        ),
        "details" => (
            "application/json",
            "run_details.json",
            export_run_details(&job.config, &result),
        ),
        "trace" => ("text/csv", "trace.csv", export_trace_csv(&result)),
        "convergence" => (
            "text/csv",
            "convergence.csv",
            export_convergence_csv(&result),
        ),
        _ => return Err(ApiError::NotFound(format!("export '{kind}'"))),
    };
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{filename}\""),
            ),
        ],
        body,
    )
        .into_response())
}
