use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{posterior_slice, Campaign, Store};
use crate::driver::{LoopConfig, Phase};
use crate::error::{Error, Result};

#[derive(Clone)]
struct AppState {
    store: Store,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks.lock().entry(id.to_string()).or_default().clone()
    }

    /// Runs a load-modify-save under the campaign's writer lock on a blocking thread.
    async fn mutate<T, F>(&self, id: String, f: F) -> Result<T>
    where
        T: Send + 'static,
        F: FnOnce(&mut Campaign) -> Result<T> + Send + 'static,
    {
        let lock = self.lock_for(&id);
        let _guard = lock.lock().await;
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || store.update(&id, f))
            .await
            .map_err(|e| Error::numerical(format!("worker failed: {e}")))?
    }

    async fn read<T, F>(&self, id: String, f: F) -> Result<T>
    where
        T: Send + 'static,
        F: FnOnce(Campaign) -> Result<T> + Send + 'static,
    {
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || f(store.load(&id)?))
            .await
            .map_err(|e| Error::numerical(format!("worker failed: {e}")))?
    }
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::InvalidArgument(_) | Error::Parse(_) => StatusCode::BAD_REQUEST,
            Error::Conflict(_) | Error::IncompatibleVersion { .. } => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| Error::Parse(format!("malformed body: {e}")))
}

#[derive(Deserialize)]
struct Observation {
    x: Vec<f64>,
    y: f64,
}

#[derive(Serialize)]
struct SuggestionBody {
    x: Vec<f64>,
    points: Vec<Vec<f64>>,
    acq_value: Option<f64>,
    acq_kind: String,
    phase: Phase,
}

#[derive(Deserialize)]
struct SliceQuery {
    #[serde(default)]
    axis: usize,
    fixed: Option<String>,
    points: Option<usize>,
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("not a number: {v:?}"))))
        .collect()
}

async fn create(State(app): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let config: LoopConfig = parse_body(&body)?;
    let campaign = Campaign::new(config)?;
    let id = app.store.save(&campaign)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id }))))
}

async fn list(State(app): State<AppState>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.store.list()?))
}

async fn summary(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.read(id, |c| Ok(c.summary())).await?))
}

async fn observe(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let obs: Observation = parse_body(&body)?;
    let summary = app
        .mutate(id, move |c| {
            c.tell(obs.x, obs.y)?;
            Ok(c.summary())
        })
        .await?;
    Ok(Json(summary))
}

async fn suggestion(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let s = app.mutate(id, |c| c.suggest()).await?;
    Ok(Json(SuggestionBody {
        x: s.x().to_vec(),
        points: s.points,
        acq_value: s.acq_value,
        acq_kind: s.acq_kind,
        phase: s.phase,
    }))
}

async fn posterior(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> ApiResult<impl IntoResponse> {
    let fixed = q.fixed.as_deref().map(parse_list).transpose()?;
    let points = q.points.unwrap_or(100);
    Ok(Json(app.read(id, move |c| posterior_slice(&c.state, q.axis, fixed, points)).await?))
}

async fn trace(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.read(id, |c| Ok(c.state.trace().to_vec())).await?))
}

async fn remove(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let lock = app.lock_for(&id);
    let _guard = lock.lock().await;
    app.store.delete(&id)?;
    app.locks.lock().remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

/// Routes of the ask-tell API over `store`.
pub fn router(store: Store) -> Router {
    let state = AppState { store, locks: Arc::default() };
    Router::new()
        .route("/campaigns", post(create).get(list))
        .route("/campaigns/{id}", get(summary).delete(remove))
        .route("/campaigns/{id}/observations", post(observe))
        .route("/campaigns/{id}/suggestion", get(suggestion))
        .route("/campaigns/{id}/posterior", get(posterior))
        .route("/campaigns/{id}/trace", get(trace))
        .with_state(state)
}

/// Serves [`router`] on `127.0.0.1:port` until interrupted.
pub async fn serve(store: Store, port: u16) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
