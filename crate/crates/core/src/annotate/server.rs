use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use tower_http::services::{ServeDir, ServeFile};

use super::{summarize, AnnotationItem, BlindItem, ScoreStore, Summary};
use crate::error::{Error, Result};
use crate::evalmetrics::{AnnotationScore, Score};

const DEFAULT_BATCH: usize = 10;
const MAX_BATCH: usize = 1000;
const MAX_ANNOTATOR_LEN: usize = 200;

/// Item pool and score store shared by every request.
#[derive(Debug)]
pub struct ServiceState {
    items: Vec<AnnotationItem>,
    index: HashMap<String, usize>,
    store: ScoreStore,
}

impl ServiceState {
    pub fn new(items: Vec<AnnotationItem>, store: ScoreStore) -> Self {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.clone(), i))
            .collect();
        ServiceState {
            items,
            index,
            store,
        }
    }

    pub fn items(&self) -> &[AnnotationItem] {
        &self.items
    }

    pub fn store(&self) -> &ScoreStore {
        &self.store
    }

    pub fn summary(&self) -> Result<Summary> {
        Ok(summarize(&self.items, &self.store.read_all()?))
    }

    /// Up to `n` items this annotator has not judged, in an order fixed by
    /// the annotator and the day.
    pub fn pending(
        &self,
        annotator: &str,
        day: NaiveDate,
        n: usize,
    ) -> Result<Vec<&AnnotationItem>> {
        let done: HashSet<String> = self
            .store
            .read_all()?
            .into_iter()
            .filter(|s| s.annotator == annotator)
            .map(|s| s.item_id)
            .collect();
        let mut todo: Vec<&AnnotationItem> = self
            .items
            .iter()
            .filter(|i| !done.contains(&i.item_id))
            .collect();
        let digest = Sha256::digest(format!("{annotator}|{day}").as_bytes());
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        todo.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        todo.truncate(n);
        Ok(todo)
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        log::error!("{e}");
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn check_annotator(a: &str) -> Result<(), ApiError> {
    if a.trim().is_empty() || a.len() > MAX_ANNOTATOR_LEN {
        return Err(bad_request(format!(
            "annotator must be 1..={MAX_ANNOTATOR_LEN} bytes"
        )));
    }
    Ok(())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

async fn get_items(
    State(state): State<Arc<ServiceState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let n = match q.get("n") {
        None => DEFAULT_BATCH,
        Some(raw) => match raw.parse::<usize>() {
            Ok(n) if (1..=MAX_BATCH).contains(&n) => n,
            _ => {
                return Err(bad_request(format!(
                    "n must be an integer in 1..={MAX_BATCH}, got {raw:?}"
                )))
            }
        },
    };
    let annotator = q.get("annotator").cloned().unwrap_or_default();
    check_annotator(&annotator)?;
    let day = Utc::now().date_naive();
    let body = blocking(move || {
        let items: Vec<BlindItem> = state
            .pending(&annotator, day, n)?
            .into_iter()
            .map(|i| i.blind())
            .collect();
        Ok(serde_json::to_value(items)?)
    })
    .await?;
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
struct ScoreRequest {
    item_id: String,
    score: f64,
    annotator: String,
}

async fn post_score(
    State(state): State<Arc<ServiceState>>,
    body: Bytes,
) -> Result<StatusCode, ApiError> {
    let req: ScoreRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("bad score body: {e}")))?;
    let score = Score::try_from(req.score).map_err(|e| bad_request(e.to_string()))?;
    check_annotator(&req.annotator)?;
    let Some(&idx) = state.index.get(&req.item_id) else {
        return Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("unknown item {:?}", req.item_id),
        ));
    };
    let record = AnnotationScore {
        item_id: req.item_id,
        source: state.items[idx].source,
        score,
        annotator: req.annotator,
        timestamp: Utc::now(),
    };
    blocking(move || state.store.append(&record)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_summary(State(state): State<Arc<ServiceState>>) -> Result<Json<Summary>, ApiError> {
    Ok(Json(blocking(move || state.summary()).await?))
}

const PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>hashgen annotation</title></head>
<body>
<h1>hashgen annotation service</h1>
<p>No UI bundle configured (start with <code>--ui-dir</code>). API:</p>
<ul>
<li><code>GET /api/items?n=10&amp;annotator=ID</code></li>
<li><code>POST /api/scores</code> with <code>{\"item_id\", \"score\", \"annotator\"}</code></li>
<li><code>GET /api/summary</code></li>
</ul>
</body></html>
";

/// API routes plus the UI bundle (or a placeholder page) at `/`.
pub fn router(state: Arc<ServiceState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/items", get(get_items))
        .route("/api/scores", axum::routing::post(post_score))
        .route("/api/summary", get(get_summary))
        .with_state(state);
    match ui_dir {
        Some(dir) => {
            let index = ServeFile::new(dir.join("index.html"));
            api.fallback_service(ServeDir::new(dir).fallback(index))
        }
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

/// Serves until Ctrl-C.
pub async fn serve(
    state: Arc<ServiceState>,
    ui_dir: Option<&Path>,
    addr: SocketAddr,
) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("bind {addr}"), e))?;
    let local = listener
        .local_addr()
        .map_err(|e| Error::io("listener", e))?;
    log::info!("annotation service on http://{local}");
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("server", e))
}
