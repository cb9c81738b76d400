//! JSON-over-HTTP front end for the protocol engine.

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use cogstyle_core::protocol::{record_schema, write_ndjson, ExportFilter, ProtocolEngine, WritingStage};
use cogstyle_core::{Error, Phase};

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            Error::Validation { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            Error::WordCount { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "word_count"),
            Error::Parse { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "parse"),
            Error::State { .. } => (StatusCode::CONFLICT, "state"),
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            Error::Integrity(_) => (StatusCode::INTERNAL_SERVER_ERROR, "integrity"),
            Error::Storage(_) => (StatusCode::SERVICE_UNAVAILABLE, "storage"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({ "error": kind, "message": self.0.to_string() });
        match &self.0 {
            Error::WordCount { count, min, max, .. } => {
                body["count"] = json!(count);
                body["min"] = json!(min);
                body["max"] = json!(max);
            }
            Error::State { actual, .. } => body["stage"] = json!(actual),
            Error::Validation { field, .. } => body["field"] = json!(field),
            _ => {}
        }
        if self.0.is_retryable() {
            body["retryable"] = json!(true);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Engine = Arc<ProtocolEngine>;

#[derive(Debug, Default, Deserialize)]
struct CreateBody {
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct WritingBody {
    text: String,
}

#[derive(Debug, Deserialize)]
struct PreferencesBody {
    responses: BTreeMap<String, i32>,
    weights: BTreeMap<String, i32>,
}

#[derive(Debug, Default, Deserialize)]
struct DistractionBody {
    score: Option<i32>,
}

#[derive(Debug, Deserialize)]
struct ChoiceBody {
    offer: String,
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    complete: bool,
}

fn phase(s: &str) -> Result<Phase, ApiError> {
    match s {
        "pre" => Ok(Phase::Pre),
        "post" => Ok(Phase::Post),
        other => Err(Error::validation("phase", format!("{other:?} is not pre or post")).into()),
    }
}

fn writing_stage(n: &str) -> Result<WritingStage, ApiError> {
    let n: u8 = n
        .parse()
        .map_err(|_| Error::validation("writing stage", format!("{n:?} is not 1 or 2")))?;
    Ok(WritingStage::from_number(n)?)
}

async fn create_session(State(e): State<Engine>, body: Option<Json<CreateBody>>) -> Result<impl IntoResponse, ApiError> {
    let seed = body.and_then(|Json(b)| b.seed);
    Ok((StatusCode::CREATED, Json(e.create_session(seed)?)))
}

pub fn router(engine: Engine) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/schema", get(|| async { Json(record_schema()) }))
        .route(
            "/protocol",
            get(|State(e): State<Engine>| async move { Json(e.assets().clone()) }),
        )
        .route("/sessions", post(create_session))
        .route(
            "/sessions/:id/stage",
            get(|State(e): State<Engine>, Path(id): Path<String>| async move {
                ApiResult::Ok(Json(e.state(&id)?))
            }),
        )
        .route(
            "/sessions/:id/writing/:n",
            post(
                |State(e): State<Engine>, Path((id, n)): Path<(String, String)>, Json(b): Json<WritingBody>| async move {
                    ApiResult::Ok(Json(e.submit_writing(&id, writing_stage(&n)?, &b.text)?))
                },
            ),
        )
        .route(
            "/sessions/:id/questionnaire/:phase",
            get(|State(e): State<Engine>, Path((id, p)): Path<(String, String)>| async move {
                ApiResult::Ok(Json(e.questionnaire(&id, phase(&p)?)?))
            }),
        )
        .route(
            "/sessions/:id/preferences/:phase",
            post(
                |State(e): State<Engine>, Path((id, p)): Path<(String, String)>, Json(b): Json<PreferencesBody>| async move {
                    ApiResult::Ok(Json(e.submit_preferences(&id, phase(&p)?, &b.responses, &b.weights)?))
                },
            ),
        )
        .route(
            "/sessions/:id/distraction",
            post(
                |State(e): State<Engine>, Path(id): Path<String>, body: Option<Json<DistractionBody>>| async move {
                    let score = body.and_then(|Json(b)| b.score);
                    ApiResult::Ok(Json(e.submit_distraction(&id, score)?))
                },
            ),
        )
        .route(
            "/sessions/:id/offers",
            get(|State(e): State<Engine>, Path(id): Path<String>| async move {
                ApiResult::Ok(Json(e.render_offers(&id)?))
            }),
        )
        .route(
            "/sessions/:id/offers/confirm",
            post(|State(e): State<Engine>, Path(id): Path<String>| async move {
                ApiResult::Ok(Json(e.confirm_offers(&id)?))
            }),
        )
        .route(
            "/sessions/:id/choice",
            post(
                |State(e): State<Engine>, Path(id): Path<String>, Json(b): Json<ChoiceBody>| async move {
                    ApiResult::Ok(Json(e.submit_choice(&id, &b.offer)?))
                },
            ),
        )
        .route(
            "/sessions/:id/finalize",
            post(|State(e): State<Engine>, Path(id): Path<String>| async move {
                ApiResult::Ok(Json(e.finalize_session(&id)?))
            }),
        )
        .route(
            "/sessions/:id/record",
            get(|State(e): State<Engine>, Path(id): Path<String>| async move {
                ApiResult::Ok(Json(e.record(&id)?))
            }),
        )
        .route(
            "/export",
            get(|State(e): State<Engine>, q: Option<Query<ExportQuery>>| async move {
                let filter = ExportFilter {
                    complete_only: q.map(|Query(q)| q.complete).unwrap_or(false),
                };
                let mut buf = Vec::new();
                write_ndjson(&mut buf, &e.export_records(filter))?;
                Ok::<_, ApiError>(([(header::CONTENT_TYPE, "application/x-ndjson")], buf))
            }),
        )
        .with_state(engine)
}

/// Serves until `shutdown` resolves, then flushes the session log.
pub async fn serve(
    listener: tokio::net::TcpListener,
    engine: Engine,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    axum::serve(listener, router(engine.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    engine.sync()?;
    log::info!("session log synced; {} session(s) on record", engine.session_count());
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
