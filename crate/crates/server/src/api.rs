use std::convert::Infallible;

use axum::body::{Body, Bytes};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use hearth::agents::AgentSpec;
use hearth::devices::{FaultKind, FaultScenario};
use hearth::governance::{rule, GovValue, GovernanceError, Verdict};
use hearth::orchestrator::{verify_anchors, Mode, OrchestratorError};
use hearth::roles::AgentRole;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::streams::{self, BlockSummary, StreamName};
use crate::AppState;

const API_CALLER: &str = "api";
const DEFAULT_ACTOR: &str = "resident";

/// A 4xx/5xx with a JSON body: `{"error": code, "detail": text, ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({"error": code, "detail": detail.into()}),
        }
    }

    fn with(mut self, key: &str, value: impl serde::Serialize) -> Self {
        self.body[key] = serde_json::to_value(value).unwrap_or(Value::Null);
        self
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), "malformed_body", r.body_text())
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Governance(GovernanceError::UnknownKey(k)) => ApiError::not_found("governance key", &k),
            OrchestratorError::Governance(GovernanceError::Invalid { key, rule_id, value }) => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "validation_failed",
                format!("value {value} for {key} violates rule {rule_id}"),
            )
            .with("key", key)
            .with("rule_id", rule_id)
            .with("rule", rule(rule_id))
            .with("value", value),
            OrchestratorError::Finished => ApiError::new(StatusCode::CONFLICT, "session_finished", e.to_string()),
            OrchestratorError::Config(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "rejected", m),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn to_json<T: serde::Serialize>(v: T) -> Json<Value> {
    Json(serde_json::to_value(v).expect("response bodies serialize"))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/chain", get(chain))
        .route("/chain/blocks/{index}", get(block))
        .route("/chain/validate", get(validate))
        .route("/agents", get(agents))
        .route("/agents/{id}/stats", get(agent_stats))
        .route("/governance", get(governance))
        .route("/governance/{key}", put(put_governance))
        .route("/devices", get(devices))
        .route("/devices/{id}/telemetry", get(device_telemetry))
        .route("/commands", post(command))
        .route("/faults", post(fault))
        .route("/session/start", post(start))
        .route("/session/stop", post(stop))
        .route("/metrics", get(metrics))
        .route("/stream/{name}", get(stream))
        .with_state(state)
}

async fn chain(State(st): State<AppState>) -> ApiResult {
    let s = st.session().await;
    let chain = s.ledger().chain();
    let blocks: Vec<BlockSummary> = chain.blocks().iter().map(BlockSummary::from).collect();
    Ok(Json(json!({
        "length": chain.len(),
        "current_difficulty": chain.current_difficulty(),
        "average_volume": chain.average_volume(),
        "blocks": blocks,
    })))
}

async fn block(State(st): State<AppState>, Path(index): Path<u64>) -> ApiResult {
    let s = st.session().await;
    s.blocks()
        .get(index as usize)
        .map(to_json)
        .ok_or_else(|| ApiError::not_found("block", &index.to_string()))
}

async fn validate(State(st): State<AppState>) -> ApiResult {
    let s = st.session().await;
    let chain = s.ledger().validate_chain();
    let anchors = verify_anchors(s.store(), s.blocks());
    let valid = chain.valid && anchors.iter().all(|a| a.valid);
    Ok(Json(json!({"valid": valid, "chain": chain, "anchors": anchors})))
}

fn agent_view(s: &hearth::orchestrator::Session, id: &str) -> Option<Value> {
    let entry = s.ledger().registry.get(id)?;
    let stats = s.history().stats(id);
    let report = s.report();
    let priority = s
        .governance()
        .snapshot()
        .priorities()
        .get(id)
        .copied()
        .unwrap_or(entry.priority);
    let spec = AgentRole::from_agent_id(id).map(AgentSpec::for_role);
    Some(json!({
        "agent_id": id,
        "role": spec.as_ref().map(|sp| sp.role),
        "backend_kind": spec.as_ref().map(|sp| sp.backend_kind),
        "min_model_tier": spec.as_ref().map(|sp| sp.min_model_tier),
        "priority": priority,
        "device_scope": entry.device_scope,
        "public_key": serde_json::to_value(entry).ok().map(|e| e["public_key"].clone()),
        "stats": stats,
        "r_accept": stats.r_accept(),
        "r_conflict": stats.r_conflict(),
        "proposed": report.proposed_by_agent.get(id).copied().unwrap_or(0),
        "committed": report.committed_by_agent.get(id).copied().unwrap_or(0),
    }))
}

async fn agents(State(st): State<AppState>) -> ApiResult {
    let s = st.session().await;
    let list: Vec<Value> = s
        .ledger()
        .registry
        .iter()
        .filter_map(|e| agent_view(&s, &e.agent_id))
        .collect();
    Ok(Json(json!({ "agents": list })))
}

async fn agent_stats(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session().await;
    agent_view(&s, &id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("agent", &id))
}

async fn governance(State(st): State<AppState>) -> ApiResult {
    let s = st.session().await;
    let g = s.governance();
    let snap = g.snapshot();
    let keys: Vec<Value> = g
        .specs()
        .map(|k| {
            json!({
                "key": k.name,
                "tier": k.tier,
                "rule_id": k.rule_id,
                "value": snap.values[k.name],
                "mutable": k.rule_id.is_some() && k.tier != hearth::governance::Tier::Locked,
                "requires_confirmation": k.tier.requires_confirmation(),
            })
        })
        .collect();
    Ok(Json(json!({
        "version": snap.version,
        "values": snap.values,
        "keys": keys,
        "priorities": snap.priorities(),
    })))
}

#[derive(Debug, Deserialize)]
struct PreferenceBody {
    value: GovValue,
    actor: Option<String>,
}

async fn put_governance(
    State(st): State<AppState>,
    Path(key): Path<String>,
    body: Result<Json<PreferenceBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let actor = body.actor.as_deref().unwrap_or(DEFAULT_ACTOR);
    let verdict = {
        let mut s = st.session().await;
        s.set_preference(&key, body.value, actor)
    };
    st.touch();
    match verdict? {
        Verdict::Denied { tier, reason } => Err(ApiError::new(StatusCode::FORBIDDEN, "locked", reason)
            .with("key", &key)
            .with("tier", tier)),
        v @ Verdict::Allowed { .. } => {
            let mut out = to_json(v).0;
            out["key"] = json!(key);
            Ok(Json(out))
        }
    }
}

async fn devices(State(st): State<AppState>) -> ApiResult {
    let mut s = st.session().await;
    Ok(Json(json!({ "devices": s.gateway().list_devices(API_CALLER) })))
}

#[derive(Debug, Deserialize)]
struct TelemetryQuery {
    last: Option<usize>,
}

async fn device_telemetry(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TelemetryQuery>,
) -> ApiResult {
    let mut s = st.session().await;
    if !s.gateway().list_devices(API_CALLER).iter().any(|d| d.device_id == id) {
        return Err(ApiError::not_found("device", &id));
    }
    let latest = s
        .gateway()
        .read_telemetry(API_CALLER)
        .and_then(|t| t.readings.get(&id).cloned());
    let last = q.last.unwrap_or(20);
    let records = s.store().records(hearth::orchestrator::Table::Telemetry, 0);
    let history: Vec<Value> = records
        .iter()
        .rev()
        .filter_map(|r| r.body["readings"].get(&id).cloned())
        .take(last)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    Ok(Json(json!({"device_id": id, "latest": latest, "history": history})))
}

#[derive(Debug, Deserialize)]
struct CommandBody {
    text: String,
}

async fn command(State(st): State<AppState>, body: Result<Json<CommandBody>, JsonRejection>) -> ApiResult {
    let Json(body) = body?;
    let result = {
        let mut s = st.session().await;
        s.command(&body.text).map(|r| (r, s.cycle() + 1))
    };
    st.touch();
    let ((outcome, verdict), next_cycle) = result.map_err(|e| match e {
        OrchestratorError::Config(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unrecognized_command", m),
        other => other.into(),
    })?;
    let queued = matches!(outcome, hearth::agents::nlu::NluOutcome::Decision(_)).then_some(next_cycle);
    Ok(Json(
        json!({"outcome": outcome, "verdict": verdict, "queued_for_cycle": queued}),
    ))
}

#[derive(Debug, Deserialize)]
struct FaultBody {
    kind: FaultKind,
    start_cycle: Option<u64>,
    duration_cycles: Option<u64>,
    targets: Option<Vec<String>>,
}

async fn fault(State(st): State<AppState>, body: Result<Json<FaultBody>, JsonRejection>) -> ApiResult {
    let Json(body) = body?;
    let mut s = st.session().await;
    if s.config().mode == Mode::Real {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "faults_disabled",
            "fault injection is not available in real mode",
        )
        .with("mode", Mode::Real));
    }
    let mut scenario = FaultScenario::new(body.kind, body.start_cycle.unwrap_or(s.cycle() + 1));
    if let Some(d) = body.duration_cycles {
        scenario.duration_cycles = d;
    }
    if let Some(t) = body.targets {
        scenario.targets = t;
    }
    s.inject_fault(scenario.clone())
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, "fault_rejected", e.to_string()))?;
    Ok(to_json(scenario))
}

#[derive(Debug, Default, Deserialize)]
struct StartBody {
    /// Total cycles to reach; defaults to the configured count.
    cycles: Option<u64>,
    /// Block until the target is reached.
    #[serde(default)]
    wait: bool,
}

async fn start(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let body: StartBody = if body.iter().all(u8::is_ascii_whitespace) {
        StartBody::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))?
    };
    let target = match body.cycles {
        Some(c) => c,
        None => st.session().await.config().cycles,
    };
    let started = st.start(target).await?;
    if body.wait {
        st.join().await;
    }
    let cycle = st.session().await.cycle();
    Ok(Json(
        json!({"started": started, "running": st.is_running(), "cycle": cycle, "target": target}),
    ))
}

async fn stop(State(st): State<AppState>) -> ApiResult {
    Ok(to_json(st.stop().await?))
}

async fn metrics(State(st): State<AppState>) -> ApiResult {
    let s = st.session().await;
    let chain = s.ledger().chain();
    let streams: serde_json::Map<String, Value> = StreamName::ALL
        .iter()
        .map(|n| (n.as_str().to_owned(), json!(streams::len(&s, *n))))
        .collect();
    Ok(Json(json!({
        "cycle": s.cycle(),
        "running": st.is_running(),
        "finished": s.is_finished(),
        "mode": s.config().mode,
        "chain_length": chain.len(),
        "current_difficulty": chain.current_difficulty(),
        "average_volume": chain.average_volume(),
        "store_records": s.store().total_records(),
        "stream_lengths": streams,
        "report": s.report(),
    })))
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    from: Option<u64>,
    /// Keep the connection open for new events (default true).
    follow: Option<bool>,
}

struct Cursor {
    st: AppState,
    name: StreamName,
    next: u64,
    follow: bool,
    done: bool,
    rx: tokio::sync::watch::Receiver<u64>,
}

async fn stream(
    State(st): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<StreamQuery>,
) -> Result<Response, ApiError> {
    let name: StreamName = name
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::NOT_FOUND, "not_found", e))?;
    let cursor = Cursor {
        rx: st.subscribe(),
        st,
        name,
        next: q.from.unwrap_or(0),
        follow: q.follow.unwrap_or(true),
        done: false,
    };
    let body = futures::stream::unfold(cursor, |mut c| async move {
        if c.done {
            return None;
        }
        loop {
            c.rx.borrow_and_update();
            let (events, finished, running) = {
                let s = c.st.session().await;
                (streams::events(&s, c.name, c.next), s.is_finished(), c.st.is_running())
            };
            if let Some(last) = events.last() {
                c.next = last.sequence + 1;
                c.done = !c.follow;
                let chunk: String = events.iter().map(|e| e.to_line()).collect();
                return Some((Ok::<_, Infallible>(Bytes::from(chunk)), c));
            }
            if !c.follow || (finished && !running) {
                return None;
            }
            if c.rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(body),
    )
        .into_response())
}
