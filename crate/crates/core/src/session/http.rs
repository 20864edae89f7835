use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Multipart, Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use super::{EventRecord, SessionError, SessionService};
use crate::runner::RunConfig;

type Svc = Arc<SessionService>;

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::StateConflict { .. } => (StatusCode::CONFLICT, "state_conflict"),
            SessionError::EmptyDocument => (StatusCode::BAD_REQUEST, "empty_document"),
            SessionError::UnknownLabel(_) => (StatusCode::NOT_FOUND, "unknown_label"),
            SessionError::NothingProposed => (StatusCode::CONFLICT, "nothing_proposed"),
            SessionError::UnsupportedFormat(_) => (StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_format"),
            SessionError::MeshFindings(check) => {
                let body = json!({"error": "mesh_findings", "message": self.to_string(), "check": check});
                return (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response();
            }
            SessionError::Extraction(_) => (StatusCode::UNPROCESSABLE_ENTITY, "extraction_failed"),
            SessionError::Llm(_) => (StatusCode::BAD_GATEWAY, "llm_unavailable"),
            SessionError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        (status, Json(json!({"error": kind, "message": self.to_string()}))).into_response()
    }
}

/// Runs a blocking service call off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, SessionError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, SessionError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(SessionError::Io(format!("worker panicked: {e}"))))
}

async fn create(State(svc): State<Svc>) -> Result<impl IntoResponse, SessionError> {
    let view = blocking(move || svc.create()).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn show(State(svc): State<Svc>, Path(id): Path<String>) -> Result<impl IntoResponse, SessionError> {
    Ok(Json(svc.view(&id)?))
}

#[derive(Deserialize)]
struct DocumentBody {
    text: String,
}

async fn document(State(svc): State<Svc>, Path(id): Path<String>, Json(body): Json<DocumentBody>) -> Result<impl IntoResponse, SessionError> {
    let candidates = blocking(move || svc.submit_document(&id, &body.text)).await?;
    Ok(Json(json!({ "candidates": candidates })))
}

async fn candidates(State(svc): State<Svc>, Path(id): Path<String>) -> Result<impl IntoResponse, SessionError> {
    Ok(Json(json!({ "candidates": svc.view(&id)?.candidates })))
}

#[derive(Deserialize)]
struct SelectionBody {
    label: String,
    #[serde(default)]
    dialogue: Vec<String>,
}

async fn selection(State(svc): State<Svc>, Path(id): Path<String>, Json(body): Json<SelectionBody>) -> Result<impl IntoResponse, SessionError> {
    let spec = blocking(move || svc.select_case(&id, &body.label, &body.dialogue)).await?;
    Ok(Json(spec))
}

async fn amendment(State(svc): State<Svc>, Path(id): Path<String>, Json(body): Json<DocumentBody>) -> Result<impl IntoResponse, SessionError> {
    let spec = blocking(move || svc.amend(&id, &body.text)).await?;
    Ok(Json(spec))
}

async fn confirmation(State(svc): State<Svc>, Path(id): Path<String>) -> Result<impl IntoResponse, SessionError> {
    let spec = blocking(move || svc.confirm(&id)).await?;
    Ok(Json(spec))
}

async fn mesh(State(svc): State<Svc>, Path(id): Path<String>, mut form: Multipart) -> Result<impl IntoResponse, SessionError> {
    let bad = |m: String| SessionError::UnsupportedFormat(m);
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.to_string()))? {
        if field.name() != Some("file") {
            continue;
        }
        let name = field.file_name().unwrap_or("upload").to_string();
        let bytes = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        let check = blocking(move || svc.attach_mesh(&id, &name, &bytes)).await?;
        return Ok(Json(check));
    }
    Err(bad("multipart body has no 'file' field".into()))
}

async fn launch(State(svc): State<Svc>, Path(id): Path<String>, body: Option<Json<RunConfig>>) -> Result<impl IntoResponse, SessionError> {
    let cfg = body.map(|Json(c)| c);
    blocking(move || svc.launch(&id, cfg).map(|_| ())).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({"launched": true}))))
}

async fn outcome(State(svc): State<Svc>, Path(id): Path<String>) -> Result<Response, SessionError> {
    Ok(match svc.outcome(&id)? {
        Some(o) => Json(o).into_response(),
        None => {
            let state = svc.view(&id)?.state;
            (StatusCode::CONFLICT, Json(json!({"error": "not_finished", "state": state}))).into_response()
        }
    })
}

#[derive(Deserialize)]
struct Cursor {
    after: Option<u64>,
}

fn sse_event(r: &EventRecord) -> Result<Event, Infallible> {
    Ok(Event::default()
        .id(r.seq.to_string())
        .event(r.event.kind())
        .json_data(r)
        .expect("record serializes"))
}

/// Numbered session events: the backlog after the client's cursor, then
/// live ones, ending with the terminal event. `Last-Event-ID` resumes.
async fn events(
    State(svc): State<Svc>,
    Path(id): Path<String>,
    Query(cursor): Query<Cursor>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, SessionError> {
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let after = resume.or(cursor.after).unwrap_or(0);
    let (backlog, rx) = svc.subscribe(&id, after)?;
    let finished = backlog.iter().any(|r| r.event.is_terminal());
    let last = backlog.last().map(|r| r.seq).unwrap_or(after);
    let live = if finished {
        stream::empty().boxed()
    } else {
        stream::unfold((rx, false), move |(mut rx, done)| async move {
            if done {
                return None;
            }
            loop {
                match rx.recv().await {
                    Ok(r) if r.seq <= last => continue,
                    Ok(r) => {
                        let end = r.event.is_terminal();
                        return Some((r, (rx, end)));
                    }
                    Err(RecvError::Lagged(n)) => log::warn!("event subscriber lagged by {n}"),
                    Err(RecvError::Closed) => return None,
                }
            }
        })
        .boxed()
    };
    let all = stream::iter(backlog).chain(live).map(|r| sse_event(&r));
    Ok(Sse::new(all).keep_alive(KeepAlive::default()))
}

pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/:id", get(show))
        .route("/sessions/:id/document", post(document))
        .route("/sessions/:id/candidates", get(candidates))
        .route("/sessions/:id/selection", post(selection))
        .route("/sessions/:id/amendment", post(amendment))
        .route("/sessions/:id/confirmation", post(confirmation))
        .route("/sessions/:id/mesh", post(mesh))
        .route("/sessions/:id/launch", post(launch))
        .route("/sessions/:id/events", get(events))
        .route("/sessions/:id/outcome", get(outcome))
        .with_state(service)
}
