//! Endpoint handlers.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::json;
use skillnet_core::evaluation::Grades;
use skillnet_core::graph::Edge;
use skillnet_core::repository::{Contribution, Repository, RepositoryError, SearchResult};
use skillnet_core::search::{SearchFilter, SearchMode, DEFAULT_TOP_K};
use skillnet_core::skill::{read_archive, Category, Tag};
use skillnet_core::store::{ManifestEntry, StoreStats};

use crate::error::ApiError;
use crate::AppState;

/// Runs a blocking repository call off the async executor.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Repository) -> Result<T, RepositoryError> + Send + 'static,
{
    let repo = Arc::clone(&state.repo);
    tokio::task::spawn_blocking(move || f(&repo))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

fn body(bytes: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    bytes.map_err(|e| {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "PayloadTooLarge" } else { "InvalidRequest" };
        ApiError::new(status, code, e.body_text())
    })
}

#[derive(Debug, Deserialize)]
struct SearchRequest {
    query: String,
    mode: Option<String>,
    category: Option<String>,
    tags: Option<Vec<String>>,
    top_k: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<SearchResult>,
}

pub async fn search(
    State(state): State<AppState>,
    bytes: Result<Bytes, BytesRejection>,
) -> Result<Json<SearchResponse>, ApiError> {
    let bytes = body(bytes)?;
    let request: SearchRequest = serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::bad_request("InvalidRequest", format!("invalid search request: {e}")))?;
    let mode: SearchMode = match request.mode.as_deref() {
        None => return Err(ApiError::bad_request("InvalidMode", "mode is required: keyword, vector or hybrid")),
        Some(raw) => raw.parse().map_err(|_| {
            ApiError::bad_request("InvalidMode", format!("unknown mode `{raw}`; expected keyword, vector or hybrid"))
        })?,
    };
    let max = state.config.effective_max_top_k();
    let top_k = request.top_k.unwrap_or(DEFAULT_TOP_K as i64);
    if top_k < 1 || top_k > max as i64 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidTopK",
            format!("top_k must be between 1 and {max}, got {top_k}"),
        ));
    }
    let category = request
        .category
        .map(|c| c.parse::<Category>())
        .transpose()
        .map_err(|e| ApiError::bad_request("InvalidCategory", e.to_string()))?;
    let tags = request
        .tags
        .unwrap_or_default()
        .into_iter()
        .map(Tag::new)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::bad_request("InvalidTag", e.to_string()))?;
    if request.query.trim().is_empty() {
        return Err(ApiError::bad_request("EmptyQuery", "query is empty"));
    }
    let filter = SearchFilter { category, tags };
    let query = request.query;
    let results = blocking(&state, move |repo| repo.search(&query, mode, top_k as usize, &filter)).await?;
    Ok(Json(SearchResponse { results }))
}

pub async fn get_skill(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ManifestEntry>, ApiError> {
    Ok(Json(blocking(&state, move |repo| repo.metadata(&id)).await?))
}

pub async fn get_archive(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let filename = format!("attachment; filename=\"{id}.tar\"");
    let bytes = blocking(&state, move |repo| repo.archive(&id)).await?;
    Ok((
        [(header::CONTENT_TYPE, "application/x-tar".to_string()), (header::CONTENT_DISPOSITION, filename)],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Admitted {
    pub skill_id: String,
    pub grades: Grades,
}

pub async fn contribute(
    State(state): State<AppState>,
    bytes: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let bytes = body(bytes)?;
    let pkg = read_archive(&bytes).map_err(|e| ApiError::bad_request("MalformedArchive", e.to_string()))?;
    let _permit = Arc::clone(&state.contributions)
        .acquire_owned()
        .await
        .map_err(|_| ApiError::internal("contribution queue closed"))?;
    match blocking(&state, move |repo| repo.contribute(pkg)).await? {
        Contribution::Admitted { skill_id, grades } => {
            Ok((StatusCode::CREATED, Json(Admitted { skill_id, grades })).into_response())
        }
        Contribution::Duplicate { existing_id } => Err(ApiError::new(
            StatusCode::CONFLICT,
            "Duplicate",
            format!("an identical skill is already stored as `{existing_id}`"),
        )
        .with_details(json!({ "existing_id": existing_id }))),
        Contribution::Rejected { report } => {
            let reasons = report.reasons();
            Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "Rejected",
                format!("skill was not admitted: {}", reasons.join("; ")),
            )
            .with_details(json!({ "report": report })))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RelationsResponse {
    pub skill_id: String,
    pub relations: Vec<Edge>,
}

pub async fn relations(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<RelationsResponse>, ApiError> {
    let skill_id = id.clone();
    let relations = blocking(&state, move |repo| repo.relations(&id)).await?;
    Ok(Json(RelationsResponse { skill_id, relations }))
}

pub async fn stats(State(state): State<AppState>) -> Result<Json<StoreStats>, ApiError> {
    Ok(Json(blocking(&state, |repo| Ok(repo.stats())).await?))
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed for this endpoint")
}
