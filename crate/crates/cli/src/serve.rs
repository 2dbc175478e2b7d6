//! HTTP API over the report store.
//!
//! ```text
//! GET  /api/v1/reports                      summaries
//! GET  /api/v1/reports/{cve}                full report
//! GET  /api/v1/reports/{cve}/network        structured network
//! GET  /api/v1/reports/{cve}/network.dot    DOT text
//! POST /api/v1/reports/{cve}/reviews        {patch_id, verdict, note, reviewer, timestamp?}
//! GET  /api/v1/reports/{cve}/audit          audit entries for one CVE
//! POST /api/v1/traces                       {cve_id} -> 202, queued
//! GET  /api/v1/traces/{cve}                 queue state of the latest request
//! ```
//!
//! Traces run one at a time on a single worker with the store's
//! configuration. Reviews only touch the review overlay of a report.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::Context;
use chrono::{DateTime, Utc};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use patchnet_core::cve::CveId;
use patchnet_core::report::export::{to_dot, to_structured};
use patchnet_core::report::{
    run_trace, AuditEntry, ReportStore, ReportSummary, ReviewDecision, RunConfig, StoreError, TraceReport, TraceStatus,
    Verdict,
};
use patchnet_core::sources::Sources;
use patchnet_core::transport::HttpClient;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use tower_http::cors::CorsLayer;

use crate::args::transport_policy;

pub const API_SCHEMA: &str = "patchnet.api/1";

/// Transport overrides applied on top of the store configuration.
#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub replay: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceJob {
    pub cve_id: CveId,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TraceStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Inner {
    store: ReportStore,
    options: ServeOptions,
    jobs: Mutex<BTreeMap<CveId, TraceJob>>,
    queue: mpsc::UnboundedSender<CveId>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({"schema": API_SCHEMA, "error": self.1}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::UnknownReport(_) => StatusCode::NOT_FOUND,
            StoreError::Review(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

fn parse_cve(raw: &str) -> Result<CveId, ApiError> {
    CveId::parse(raw).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

impl AppState {
    fn trace_config(&self) -> Result<RunConfig, StoreError> {
        let mut config = self.0.store.config()?;
        let o = &self.0.options;
        config.transport = if o.replay.is_some() || o.cache.is_some() {
            transport_policy(o.replay.as_ref(), o.cache.as_ref(), config.transport.rate_limit)
        } else {
            crate::args::with_token(config.transport)
        };
        Ok(config)
    }

    fn set_job(&self, job: TraceJob) {
        self.0.jobs.lock().unwrap_or_else(|e| e.into_inner()).insert(job.cve_id.clone(), job);
    }

    fn run_job(&self, cve: &CveId) -> TraceJob {
        let outcome = self.trace_config().map_err(anyhow::Error::from).and_then(|config| {
            let http = HttpClient::from_policy(&config.transport)?;
            let report = run_trace(cve, &config, &Sources::new(http))?;
            Ok(self.0.store.save_trace(report)?)
        });
        match outcome {
            Ok(report) => TraceJob {
                cve_id: cve.clone(),
                state: JobState::Done,
                status: Some(report.status),
                exit_code: Some(report.exit_code()),
                error: None,
            },
            Err(e) => {
                tracing::warn!(%cve, error = %e, "queued trace failed");
                TraceJob { cve_id: cve.clone(), state: JobState::Failed, status: None, exit_code: None, error: Some(format!("{e:#}")) }
            }
        }
    }
}

async fn worker(state: AppState, mut rx: mpsc::UnboundedReceiver<CveId>) {
    while let Some(cve) = rx.recv().await {
        state.set_job(TraceJob { cve_id: cve.clone(), state: JobState::Running, status: None, exit_code: None, error: None });
        let s = state.clone();
        let job = match tokio::task::spawn_blocking(move || s.run_job(&cve)).await {
            Ok(job) => job,
            Err(e) => {
                tracing::error!(error = %e, "trace worker panicked");
                continue;
            }
        };
        state.set_job(job);
    }
}

/// Builds the router and starts the trace worker on the current runtime.
pub fn app(store_dir: &Path, options: ServeOptions) -> anyhow::Result<Router> {
    let store = ReportStore::open(store_dir).with_context(|| format!("opening store {}", store_dir.display()))?;
    store.config().context("reading store configuration")?;
    let (tx, rx) = mpsc::unbounded_channel();
    let state = AppState(Arc::new(Inner { store, options, jobs: Mutex::new(BTreeMap::new()), queue: tx }));
    tokio::spawn(worker(state.clone(), rx));
    Ok(Router::new()
        .route("/api/v1/reports", get(list_reports))
        .route("/api/v1/reports/{cve}", get(get_report))
        .route("/api/v1/reports/{cve}/network", get(get_network))
        .route("/api/v1/reports/{cve}/network.dot", get(get_dot))
        .route("/api/v1/reports/{cve}/reviews", post(post_review))
        .route("/api/v1/reports/{cve}/audit", get(get_audit))
        .route("/api/v1/traces", post(post_trace))
        .route("/api/v1/traces/{cve}", get(get_trace))
        .layer(CorsLayer::permissive())
        .with_state(state))
}

pub async fn serve(store_dir: &Path, bind: SocketAddr, options: ServeOptions) -> anyhow::Result<()> {
    let router = app(store_dir, options)?;
    let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
    tracing::info!(%bind, store = %store_dir.display(), "serving");
    axum::serve(listener, router).await?;
    Ok(())
}

#[derive(Serialize)]
struct ReportList {
    schema: &'static str,
    reports: Vec<ReportSummary>,
}

async fn list_reports(State(s): State<AppState>) -> Result<Json<ReportList>, ApiError> {
    let reports = blocking(move || Ok(s.0.store.list()?)).await?;
    Ok(Json(ReportList { schema: API_SCHEMA, reports }))
}

async fn load(s: AppState, raw: String) -> Result<TraceReport, ApiError> {
    let cve = parse_cve(&raw)?;
    blocking(move || Ok(s.0.store.load(&cve)?)).await
}

async fn get_report(State(s): State<AppState>, UrlPath(cve): UrlPath<String>) -> Result<Json<TraceReport>, ApiError> {
    Ok(Json(load(s, cve).await?))
}

async fn get_network(State(s): State<AppState>, UrlPath(cve): UrlPath<String>) -> Result<Response, ApiError> {
    let report = load(s, cve).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], to_structured(&report.network)).into_response())
}

async fn get_dot(State(s): State<AppState>, UrlPath(cve): UrlPath<String>) -> Result<Response, ApiError> {
    let report = load(s, cve).await?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], to_dot(&report.network)).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ReviewRequest {
    pub patch_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub reviewer: String,
    /// Defaults to the time the server receives the decision.
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Serialize)]
struct ReviewResponse {
    schema: &'static str,
    applied: bool,
    current: Option<ReviewDecision>,
}

async fn post_review(
    State(s): State<AppState>,
    UrlPath(cve): UrlPath<String>,
    Json(req): Json<ReviewRequest>,
) -> Result<Json<ReviewResponse>, ApiError> {
    let cve = parse_cve(&cve)?;
    let decision = ReviewDecision {
        patch_id: req.patch_id,
        verdict: req.verdict,
        note: req.note,
        reviewer: req.reviewer,
        timestamp: req.timestamp.unwrap_or_else(Utc::now),
    };
    let patch = decision.patch_id.clone();
    let (report, applied) = blocking(move || Ok(s.0.store.apply_review(&cve, decision)?)).await?;
    Ok(Json(ReviewResponse { schema: API_SCHEMA, applied, current: report.review.get(&patch).cloned() }))
}

#[derive(Serialize)]
struct AuditList {
    schema: &'static str,
    entries: Vec<AuditEntry>,
}

async fn get_audit(State(s): State<AppState>, UrlPath(cve): UrlPath<String>) -> Result<Json<AuditList>, ApiError> {
    let cve = parse_cve(&cve)?;
    let entries = blocking(move || Ok(s.0.store.audit(Some(&cve))?)).await?;
    Ok(Json(AuditList { schema: API_SCHEMA, entries }))
}

#[derive(Debug, Deserialize)]
pub struct TraceRequest {
    pub cve_id: String,
}

async fn post_trace(State(s): State<AppState>, Json(req): Json<TraceRequest>) -> Result<(StatusCode, Json<TraceJob>), ApiError> {
    let cve = parse_cve(&req.cve_id)?;
    let mut jobs = s.0.jobs.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(job) = jobs.get(&cve).filter(|j| matches!(j.state, JobState::Queued | JobState::Running)) {
        return Ok((StatusCode::ACCEPTED, Json(job.clone())));
    }
    let job = TraceJob { cve_id: cve.clone(), state: JobState::Queued, status: None, exit_code: None, error: None };
    jobs.insert(cve.clone(), job.clone());
    s.0.queue
        .send(cve)
        .map_err(|_| ApiError(StatusCode::SERVICE_UNAVAILABLE, "trace worker stopped".into()))?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_trace(State(s): State<AppState>, UrlPath(cve): UrlPath<String>) -> Result<Json<TraceJob>, ApiError> {
    let cve = parse_cve(&cve)?;
    let jobs = s.0.jobs.lock().unwrap_or_else(|e| e.into_inner());
    jobs.get(&cve)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no trace requested for {cve}")))
}
