//! HTTP + SSE surface over [`Gateway`].

use std::convert::Infallible;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use super::{EvalRequest, Gateway, GatewayError};
use crate::agent::{ApprovalDecision, StepRecord, TicketStatus};
use crate::netmodel::ServiceDemand;

pub struct ApiError(GatewayError);

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({"error": self.0.to_string(), "code": self.0.code()}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub topology: String,
    #[serde(default)]
    pub demands: Option<Vec<ServiceDemand>>,
}

#[derive(Debug, Deserialize)]
pub struct QueryBody {
    pub text: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct EventsQuery {
    pub from_seq: Option<u64>,
    /// Keep the stream open for future records (default true).
    pub follow: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
pub struct GsnrQuery {
    pub service: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
pub struct TicketQuery {
    pub session: Option<String>,
    pub status: Option<TicketStatus>,
}

pub fn router(gw: Gateway) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}/query", post(submit_query))
        .route("/api/sessions/{id}/jobs/{job}", get(job))
        .route("/api/sessions/{id}/events", get(events))
        .route("/api/sessions/{id}/transcripts/{job}", get(transcript))
        .route("/api/sessions/{id}/alarms", post(ingest_alarms))
        .route("/api/network/{id}/state", get(network_state))
        .route("/api/network/{id}/gsnr", get(gsnr))
        .route("/api/approvals", get(list_tickets))
        .route("/api/approvals/{ticket}", post(resolve_approval))
        .route("/api/eval/run", post(start_eval))
        .route("/api/eval/runs/{id}", get(eval_job))
        .layer(middleware::from_fn_with_state(gw.clone(), auth))
        .with_state(gw)
}

async fn auth(State(gw): State<Gateway>, req: Request, next: Next) -> Response {
    if let Some(token) = &gw.config().api_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return (StatusCode::UNAUTHORIZED, Json(json!({"error": "missing or invalid bearer token", "code": "UNAUTHORIZED"})))
                .into_response();
        }
    }
    next.run(req).await
}

async fn create_session(State(gw): State<Gateway>, Json(b): Json<CreateSession>) -> ApiResult<impl IntoResponse> {
    let id = gw.create_session(&b.topology, b.demands)?;
    Ok((StatusCode::CREATED, Json(json!({"session_id": id, "topology": b.topology}))))
}

async fn list_sessions(State(gw): State<Gateway>) -> impl IntoResponse {
    Json(gw.sessions())
}

async fn submit_query(State(gw): State<Gateway>, Path(id): Path<String>, Json(b): Json<QueryBody>) -> ApiResult<impl IntoResponse> {
    let job = gw.submit_query(&id, &b.text)?;
    Ok((StatusCode::ACCEPTED, Json(json!({"job_id": job, "session_id": id}))))
}

async fn job(State(gw): State<Gateway>, Path((id, job)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.job(&id, &job)?))
}

async fn transcript(State(gw): State<Gateway>, Path((id, job)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.transcript(&id, &job)?))
}

fn sse_event(r: &StepRecord) -> Result<Event, Infallible> {
    let step = serde_json::to_value(r.step).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    Ok(Event::default()
        .id(r.seq.to_string())
        .event(step)
        .data(serde_json::to_string(r).expect("record serialises")))
}

/// Resumes from `from_seq`, else one past `Last-Event-ID`, else 0.
async fn events(
    State(gw): State<Gateway>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let last = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|s| s + 1);
    let from = q.from_seq.or(last).unwrap_or(0);
    let (backlog, rx) = gw.subscribe(&id, from)?;
    let next = backlog.last().map_or(from, |r| r.seq + 1);
    let head = stream::iter(backlog.iter().map(sse_event).collect::<Vec<_>>());
    let tail = stream::unfold((rx, next), |(mut rx, next)| async move {
        loop {
            match rx.recv().await {
                Ok(r) if r.seq >= next => return Some((r.clone(), (rx, r.seq + 1))),
                Ok(_) | Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    })
    .map(|r| sse_event(&r));
    let tail = if q.follow.unwrap_or(true) { tail.boxed() } else { stream::empty().boxed() };
    Ok(Sse::new(head.chain(tail)).keep_alive(KeepAlive::default()))
}

async fn ingest_alarms(State(gw): State<Gateway>, Path(id): Path<String>, body: String) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.ingest_alarms(&id, &body)?))
}

async fn network_state(State(gw): State<Gateway>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.network_state(&id)?))
}

async fn gsnr(State(gw): State<Gateway>, Path(id): Path<String>, Query(q): Query<GsnrQuery>) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.gsnr(&id, q.service.as_deref())?))
}

async fn list_tickets(State(gw): State<Gateway>, Query(q): Query<TicketQuery>) -> impl IntoResponse {
    Json(gw.tickets(q.session.as_deref(), q.status))
}

async fn resolve_approval(
    State(gw): State<Gateway>,
    Path(ticket): Path<String>,
    Json(d): Json<ApprovalDecision>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.resolve_approval(&ticket, d)?))
}

async fn start_eval(State(gw): State<Gateway>, Json(req): Json<EvalRequest>) -> ApiResult<impl IntoResponse> {
    let id = gw.start_eval(req)?;
    Ok((StatusCode::ACCEPTED, Json(json!({"eval_id": id}))))
}

async fn eval_job(State(gw): State<Gateway>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(gw.eval_job(&id)?))
}

/// Binds the configured address and serves until Ctrl-C.
pub async fn serve(gw: Gateway) -> std::io::Result<()> {
    let addr = format!("{}:{}", gw.config().host, gw.config().port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(gw))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
