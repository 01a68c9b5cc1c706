use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::batch::{create_batch, AnnotationTask};
use crate::store::{Progress, Store};
use crate::taxonomy::Taxonomy;
use crate::ServiceError;

/// Static bearer tokens: annotator tokens map to annotator ids; admin tokens
/// may create batches and read any queue.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Auth {
    #[serde(default)]
    pub annotators: HashMap<String, String>,
    #[serde(default)]
    pub admins: HashSet<String>,
}

enum Caller {
    Annotator(String),
    Admin,
}

impl Auth {
    fn caller(&self, headers: &HeaderMap) -> Result<Caller, ServiceError> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ServiceError::BadToken)?;
        if self.admins.contains(token) {
            return Ok(Caller::Admin);
        }
        self.annotators
            .get(token)
            .map(|a| Caller::Annotator(a.clone()))
            .ok_or(ServiceError::BadToken)
    }

    /// The caller must be `annotator` or an admin.
    fn as_annotator(&self, headers: &HeaderMap, annotator: Option<&str>) -> Result<String, ServiceError> {
        match (self.caller(headers)?, annotator) {
            (Caller::Annotator(a), None) => Ok(a),
            (Caller::Annotator(a), Some(q)) if a == q => Ok(a),
            (Caller::Admin, Some(q)) => Ok(q.to_string()),
            _ => Err(ServiceError::BadToken),
        }
    }

    fn admin(&self, headers: &HeaderMap) -> Result<(), ServiceError> {
        match self.caller(headers)? {
            Caller::Admin => Ok(()),
            Caller::Annotator(_) => Err(ServiceError::BadToken),
        }
    }
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RwLock<Store>>,
    pub auth: Arc<Auth>,
    /// Directory holding pre-cut `<task_id>.mp4` clips.
    pub clips_dir: Option<PathBuf>,
    pub clock: Clock,
}

impl AppState {
    pub fn new(store: Store, auth: Auth) -> Self {
        Self {
            store: Arc::new(RwLock::new(store)),
            auth: Arc::new(auth),
            clips_dir: None,
            clock: Arc::new(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            }),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/next-task", get(next_task))
        .route("/api/clip/{task}", get(clip))
        .route("/api/label", post(label))
        .route("/api/export", get(export))
        .route("/api/agreement", get(agreement))
        .route("/api/batch", post(batch))
        .with_state(state)
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTask {
    pub batch_id: String,
    pub task: AnnotationTask,
    pub progress: Progress,
    /// Taxonomy labels followed by `not-a-smile`.
    pub labels: Vec<String>,
}

async fn next_task(
    State(st): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<AnnotatorQuery>,
) -> Result<Response, ServiceError> {
    let annotator = st.auth.as_annotator(&headers, q.annotator.as_deref())?;
    let store = st.store.read().await;
    let Some(task) = store.next_task(&annotator) else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let (batch, _) = store.find_task(&task.task_id).expect("queued task exists");
    let body = NextTask {
        batch_id: batch.batch_id.clone(),
        task: task.clone(),
        progress: store.progress(&annotator),
        labels: task.taxonomy.categories().iter().map(|s| s.to_string()).collect(),
    };
    Ok(Json(body).into_response())
}

/// `(start, end_inclusive)` of a single `bytes=` range.
fn parse_range(spec: &str, len: u64) -> Result<(u64, u64), ServiceError> {
    let r = spec
        .strip_prefix("bytes=")
        .filter(|r| !r.contains(','))
        .ok_or_else(|| ServiceError::BadRequest(format!("range {spec:?}")))?;
    let (a, b) = r
        .split_once('-')
        .ok_or_else(|| ServiceError::BadRequest(format!("range {spec:?}")))?;
    let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| ServiceError::BadRequest(format!("range {spec:?}")));
    let (start, end) = match (a.is_empty(), b.is_empty()) {
        (false, false) => (parse(a)?, parse(b)?.min(len.saturating_sub(1))),
        (false, true) => (parse(a)?, len.saturating_sub(1)),
        (true, false) => {
            let n = parse(b)?.min(len);
            (len - n, len.saturating_sub(1))
        }
        (true, true) => return Err(ServiceError::BadRequest(format!("range {spec:?}"))),
    };
    if len == 0 || start > end || start >= len {
        return Err(ServiceError::RangeNotSatisfiable);
    }
    Ok((start, end))
}

async fn clip(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(task_id): Path<String>,
) -> Result<Response, ServiceError> {
    st.auth.caller(&headers)?;
    let task = {
        let store = st.store.read().await;
        store
            .find_task(&task_id)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| ServiceError::UnknownTask(task_id.clone()))?
    };
    if let Some(dir) = &st.clips_dir {
        let path = dir.join(format!("{task_id}.mp4"));
        if path.is_file() {
            let bytes = tokio::fs::read(&path).await.map_err(|e| ServiceError::io(&path, e))?;
            let len = bytes.len() as u64;
            let range = headers.get(header::RANGE).and_then(|v| v.to_str().ok());
            return Ok(match range {
                Some(spec) => {
                    let (a, b) = parse_range(spec, len)?;
                    (
                        StatusCode::PARTIAL_CONTENT,
                        [
                            (header::CONTENT_TYPE, "video/mp4".to_string()),
                            (header::ACCEPT_RANGES, "bytes".to_string()),
                            (header::CONTENT_RANGE, format!("bytes {a}-{b}/{len}")),
                        ],
                        bytes[a as usize..=b as usize].to_vec(),
                    )
                        .into_response()
                }
                None => (
                    StatusCode::OK,
                    [
                        (header::CONTENT_TYPE, "video/mp4".to_string()),
                        (header::ACCEPT_RANGES, "bytes".to_string()),
                    ],
                    bytes,
                )
                    .into_response(),
            });
        }
    }
    let body = serde_json::json!({
        "task_id": task.task_id,
        "kind": "trace",
        "clip_start": task.clip_start,
        "clip_end": task.clip_end,
        "segment_start": task.segment_start,
        "segment_end": task.segment_end,
        "trace": task.trace,
        "excerpt": task.excerpt,
    });
    Ok(Json(body).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub task_id: String,
    /// Defaults to the token's annotator; required for admin tokens.
    #[serde(default)]
    pub annotator_id: Option<String>,
    pub label: String,
    #[serde(default)]
    pub free_text: Option<String>,
    pub revision: u64,
}

async fn label(
    State(st): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<LabelRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    st.auth.caller(&headers)?;
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let annotator = st.auth.as_annotator(&headers, req.annotator_id.as_deref())?;
    let now = (st.clock)();
    let mut store = st.store.write().await;
    let out = store.submit(&req.task_id, &annotator, &req.label, req.free_text, req.revision, now)?;
    let status = if out.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(out)).into_response())
}

#[derive(Deserialize)]
struct BatchQuery {
    batch: String,
}

async fn export(
    State(st): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<BatchQuery>,
) -> Result<Response, ServiceError> {
    st.auth.caller(&headers)?;
    let records = st.store.read().await.export(&q.batch)?;
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(&r).expect("record serializes"));
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn agreement(
    State(st): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<BatchQuery>,
) -> Result<Response, ServiceError> {
    st.auth.caller(&headers)?;
    let report = st.store.read().await.agreement(&q.batch)?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub batch_id: String,
    pub taxonomy: Taxonomy,
    pub tasks: Vec<AnnotationTask>,
    pub annotators: Vec<String>,
    pub raters_per_task: usize,
    #[serde(default)]
    pub seed: u64,
}

async fn batch(
    State(st): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<BatchRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    st.auth.admin(&headers)?;
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let b = create_batch(&req.batch_id, req.tasks, req.taxonomy, &req.annotators, req.raters_per_task, req.seed)?;
    let summary = serde_json::json!({
        "batch_id": b.batch_id,
        "tasks": b.tasks.len(),
        "assignments": b.assignments,
    });
    st.store.write().await.add_batch(b)?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("bytes=0-9", 100).unwrap(), (0, 9));
        assert_eq!(parse_range("bytes=90-", 100).unwrap(), (90, 99));
        assert_eq!(parse_range("bytes=-10", 100).unwrap(), (90, 99));
        assert_eq!(parse_range("bytes=50-500", 100).unwrap(), (50, 99));
        assert!(matches!(parse_range("bytes=100-", 100), Err(ServiceError::RangeNotSatisfiable)));
        assert!(parse_range("items=0-1", 100).is_err());
    }
}
