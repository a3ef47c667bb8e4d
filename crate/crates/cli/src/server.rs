//! HTTP read/query API over one immutable [`Session`].
//!
//! Status codes: 400 for bodies or queries that do not parse, 404 for
//! unknown snapshots, members or routes, 422 for well-formed requests that
//! violate a domain constraint. Every error body is
//! `{"error": {"code", "message"}}`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rolecycle_core::event::MemberId;
use rolecycle_core::lifecycle::{project_trajectory, TransitionMatrix};
use rolecycle_core::role::{DistributionVector, Role};
use rolecycle_core::steering::{recommend, whatif, InterventionSpec, TargetDistribution};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::files::matrix_table;
use crate::session::Session;

/// Upper bound on projection steps and steering horizons per request.
pub const MAX_STEPS: usize = 10_000;
/// Upper bound on catalog size per steering request.
pub const MAX_CATALOG: usize = 256;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    fn unprocessable(code: &'static str, message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type Shared = Arc<Session>;

pub fn router(session: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/distribution", get(distribution))
        .route("/assignments", get(assignments))
        .route("/matrix", get(matrix))
        .route("/violations", get(violations))
        .route("/members/{id}/features", get(features))
        .route("/project", post(project))
        .route("/whatif", post(whatif_handler))
        .route("/steer", post(steer))
        .fallback(|| async { ApiError::not_found("not_found", "no such route") })
        .with_state(session)
}

fn snapshot_index(session: &Session, query: &HashMap<String, String>) -> Result<usize, ApiError> {
    let n = session.snapshots.len();
    match query.get("snapshot") {
        None if n == 0 => Err(ApiError::not_found("unknown_snapshot", "the log has no snapshots")),
        None => Ok(n - 1),
        Some(raw) => {
            let i: usize = raw
                .parse()
                .map_err(|_| ApiError::bad_request(format!("snapshot must be a non-negative integer, got {raw:?}")))?;
            if i < n {
                Ok(i)
            } else {
                Err(ApiError::not_found(
                    "unknown_snapshot",
                    format!("snapshot {i} does not exist; {n} snapshots available"),
                ))
            }
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Converts an already-parsed JSON fragment; failures are constraint errors.
fn convert<T: DeserializeOwned>(value: Value, code: &'static str, what: &str) -> Result<T, ApiError> {
    serde_json::from_value(value).map_err(|e| ApiError::unprocessable(code, format!("invalid {what}: {e}")))
}

fn masked_matrix(session: &Session) -> Result<&TransitionMatrix, ApiError> {
    session.estimate.as_ref().map(|e| &e.masked).ok_or_else(|| {
        ApiError::unprocessable(
            "no_observations",
            "no member was observed in two consecutive snapshots",
        )
    })
}

fn start_distribution(session: &Session, given: Option<Value>) -> Result<DistributionVector, ApiError> {
    match given {
        Some(v) => convert(v, "invalid_distribution", "distribution"),
        None => session.current().map(|(_, d)| d).ok_or_else(|| {
            ApiError::unprocessable("undefined_distribution", "no snapshot has classified members")
        }),
    }
}

fn check_steps(name: &str, steps: usize) -> Result<(), ApiError> {
    if steps > MAX_STEPS {
        return Err(ApiError::unprocessable(
            "invalid_parameter",
            format!("{name} must be at most {MAX_STEPS}"),
        ));
    }
    Ok(())
}

fn steering_error(e: rolecycle_core::steering::SteeringError) -> ApiError {
    use rolecycle_core::steering::SteeringError as E;
    let code = match e {
        E::InvalidEdit { .. } => "invalid_edit",
        E::EmptyCatalog => "empty_catalog",
        E::DuplicateId(_) => "duplicate_id",
        _ => "steering_error",
    };
    ApiError::unprocessable(code, e)
}

async fn health(State(s): State<Shared>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "session": s.id,
        "members": s.members,
        "events": s.events,
        "snapshots": s.snapshots.len(),
    }))
}

async fn distribution(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let i = snapshot_index(&s, &q)?;
    let snap = &s.snapshots[i];
    Ok(Json(json!({
        "snapshot_index": i,
        "window": snap.window,
        "members": snap.assignments.len(),
        "distribution": snap.distribution,
    })))
}

async fn assignments(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let i = snapshot_index(&s, &q)?;
    let snap = &s.snapshots[i];
    let rows: Vec<Value> = snap
        .assignments
        .values()
        .map(|a| {
            json!({
                "member": a.member,
                "role": a.role,
                "sub_role": a.sub_role,
                "fired_rules": a.fired_rules_text(),
            })
        })
        .collect();
    Ok(Json(json!({ "snapshot_index": i, "window": snap.window, "assignments": rows })))
}

async fn matrix(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let masked = match q.get("masked").map(String::as_str) {
        None | Some("true") => true,
        Some("false") => false,
        Some(other) => return Err(ApiError::bad_request(format!("masked must be true or false, got {other:?}"))),
    };
    let estimate = s.estimate.as_ref().ok_or_else(|| {
        ApiError::not_found("no_observations", "no member was observed in two consecutive snapshots")
    })?;
    let m = if masked { &estimate.masked } else { &estimate.raw };
    Ok(Json(json!({
        "kind": m.kind(),
        "roles": Role::ALL,
        "rows": matrix_table(m),
        "disallowed_mass": m.disallowed_mass(),
        "counts": estimate.counts,
    })))
}

async fn violations(State(s): State<Shared>) -> Json<Value> {
    let total: usize = s.violations.iter().map(|m| m.violations.len()).sum();
    Json(json!({
        "min_dwell": s.options.min_dwell,
        "total": total,
        "members": s.violations,
    }))
}

async fn features(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let i = snapshot_index(&s, &q)?;
    let unknown = || ApiError::not_found("unknown_member", format!("member {id:?} is not in snapshot {i}"));
    let member = MemberId::new(&id).ok_or_else(unknown)?;
    let snap = &s.snapshots[i];
    let fv = snap.features.get(&member).ok_or_else(unknown)?;
    let assignment = snap.assignments.get(&member);
    Ok(Json(json!({
        "snapshot_index": i,
        "features": fv,
        "role": assignment.map(|a| a.role),
        "fired_rules": assignment.map(|a| a.fired_rules_text()),
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectRequest {
    steps: usize,
    #[serde(default)]
    distribution: Option<Value>,
}

async fn project(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: ProjectRequest = parse_body(&body)?;
    check_steps("steps", req.steps)?;
    let m = masked_matrix(&s)?;
    let d = start_distribution(&s, req.distribution)?;
    let trajectory =
        project_trajectory(&d, m, req.steps).map_err(|e| ApiError::unprocessable("invalid_distribution", e))?;
    Ok(Json(json!({ "steps": req.steps, "trajectory": trajectory })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    interventions: Vec<Value>,
    steps: usize,
    #[serde(default)]
    distribution: Option<Value>,
}

async fn whatif_handler(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: WhatIfRequest = parse_body(&body)?;
    check_steps("steps", req.steps)?;
    let interventions: Vec<InterventionSpec> = req
        .interventions
        .into_iter()
        .map(|v| convert(v, "invalid_edit", "intervention"))
        .collect::<Result<_, _>>()?;
    let m = masked_matrix(&s)?;
    let d = start_distribution(&s, req.distribution)?;
    let trajectory = whatif(&d, m, &interventions, req.steps).map_err(steering_error)?;
    Ok(Json(json!({ "steps": req.steps, "trajectory": trajectory })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SteerRequest {
    target: Value,
    catalog: Vec<Value>,
    horizon: usize,
    #[serde(default = "default_plan_len")]
    max_plan_len: usize,
    #[serde(default)]
    distribution: Option<Value>,
}

fn default_plan_len() -> usize {
    2
}

async fn steer(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: SteerRequest = parse_body(&body)?;
    check_steps("horizon", req.horizon)?;
    if req.catalog.len() > MAX_CATALOG {
        return Err(ApiError::unprocessable(
            "invalid_parameter",
            format!("catalog must have at most {MAX_CATALOG} interventions"),
        ));
    }
    let target: TargetDistribution = convert(req.target, "invalid_target", "target")?;
    let catalog: Vec<InterventionSpec> = req
        .catalog
        .into_iter()
        .map(|v| convert(v, "invalid_edit", "intervention"))
        .collect::<Result<_, _>>()?;
    let m = masked_matrix(&s)?.clone();
    let d = start_distribution(&s, req.distribution)?;
    let (horizon, max_len) = (req.horizon, req.max_plan_len);
    let rec = tokio::task::spawn_blocking(move || recommend(&d, &m, &target, &catalog, horizon, max_len))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(steering_error)?;
    Ok(Json(serde_json::to_value(&rec).expect("recommendation serializes")))
}
