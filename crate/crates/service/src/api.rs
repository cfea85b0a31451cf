use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use vidmod_core::risk::moderation_metrics;
use vidmod_core::{Evidence, Label, ReviewLabel};

use crate::error::ApiError;
use crate::state::{AppState, LayoutKind};

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/queue", get(queue))
        .route("/videos/{id}", get(video))
        .route("/videos/{id}/frames", get(frames))
        .route("/videos/{id}/audio", get(audio))
        .route("/videos/{id}/thumb/{frame}", get(thumb))
        .route("/videos/{id}/review", post(review))
        .route("/train", post(train))
        .route("/model", get(model))
        .route("/metrics", get(metrics))
        .route("/palette", get(palette))
        .with_state(state)
}

fn json_bytes(bytes: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Deserialize)]
struct QueueParams {
    threshold: Option<f64>,
}

async fn queue(State(state): Shared, Query(params): Query<QueueParams>) -> Result<Response, ApiError> {
    let threshold = params.threshold.unwrap_or(state.config.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ApiError::bad_request(format!("threshold {threshold} outside [0, 1]")));
    }
    let items = blocking(move || state.queue(threshold)).await?;
    Ok(Json(items).into_response())
}

async fn layout(state: Arc<AppState>, id: String, kind: LayoutKind) -> Result<Response, ApiError> {
    Ok(json_bytes(blocking(move || state.layout(&id, kind)).await?))
}

async fn video(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    layout(state, id, LayoutKind::Video).await
}

async fn frames(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    layout(state, id, LayoutKind::Frames).await
}

async fn audio(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    layout(state, id, LayoutKind::Audio).await
}

fn placeholder_svg(video_id: &str, frame: usize, time: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"160\" height=\"90\" viewBox=\"0 0 160 90\">\
         <rect width=\"160\" height=\"90\" fill=\"#d9d9d9\"/>\
         <text x=\"80\" y=\"50\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" fill=\"#555\">\
         {} #{frame} @ {time:.1}s</text></svg>",
        escape_xml(video_id)
    )
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn image_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn thumb(State(state): Shared, Path((id, frame)): Path<(String, usize)>) -> Result<Response, ApiError> {
    let video = state.video(&id)?;
    let annotation = video
        .frames
        .get(frame)
        .ok_or_else(|| ApiError::not_found(format!("video `{id}` has {} frames", video.frames.len())))?;
    if let Some(rel) = &annotation.thumbnail {
        let path = state.corpus()?.base_dir.join(rel);
        if let Ok(bytes) = tokio::fs::read(&path).await {
            return Ok(([(header::CONTENT_TYPE, image_type(&path))], bytes).into_response());
        }
    }
    let svg = placeholder_svg(&id, frame, annotation.time);
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

#[derive(Deserialize)]
struct ReviewBody {
    label: Label,
    #[serde(default)]
    evidence: Evidence,
    moderator_id: String,
}

async fn review(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Json<ReviewBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    state.video(&id)?;
    let Json(body) = body.map_err(|e| ApiError::unprocessable(e.body_text()))?;
    let label = ReviewLabel {
        video_id: id,
        label: body.label,
        evidence: body.evidence,
        moderator_id: body.moderator_id,
        timestamp: 0,
    };
    let worker = state.clone();
    let receipt = blocking(move || worker.submit_review(label)).await?;
    if receipt.training_triggered {
        tokio::task::spawn_blocking(move || match state.train() {
            Ok(m) => tracing::info!(version = m.version, "auto-retrain finished"),
            Err(e) => tracing::info!(reason = %e.message, "auto-retrain skipped"),
        });
    }
    Ok((StatusCode::OK, Json(receipt)).into_response())
}

async fn train(State(state): Shared) -> Result<Response, ApiError> {
    let model = blocking(move || state.train()).await?;
    let meta = model.training_meta.as_ref();
    Ok(Json(json!({
        "version": model.version,
        "metrics": {
            "num_reviews": meta.map(|m| m.num_reviews),
            "final_loss": meta.map(|m| m.final_loss),
            "training_accuracy": meta.map(|m| m.training_accuracy),
        },
    }))
    .into_response())
}

async fn model(State(state): Shared) -> Json<serde_json::Value> {
    let model = state.model();
    Json(json!({
        "version": model.version,
        "stage": model.stage,
        "training_meta": model.training_meta,
    }))
}

#[derive(Deserialize)]
struct MetricsParams {
    hours: Option<f64>,
}

async fn metrics(State(state): Shared, Query(params): Query<MetricsParams>) -> Result<Response, ApiError> {
    let hours = params.hours.ok_or_else(|| ApiError::bad_request("missing `hours` parameter"))?;
    let corpus = state.corpus()?;
    let truth: HashMap<String, Label> = corpus
        .videos
        .iter()
        .filter_map(|v| v.ground_truth.map(|l| (v.video_id.clone(), l)))
        .collect();
    let reviews = state.reviews();
    let m = moderation_metrics(&reviews, &truth, hours).map_err(|e| match e {
        vidmod_core::risk::RiskError::MissingTruth(_) => ApiError::conflict("missing_truth", e.to_string()),
        other => ApiError::bad_request(other.to_string()),
    })?;
    Ok(Json(json!({ "time_efficiency": m.time_efficiency, "missing_rate": m.missing_rate, "reviews": reviews.len() }))
        .into_response())
}

async fn palette(State(state): Shared) -> Json<crate::config::Palette> {
    Json(state.config.palette.clone())
}
