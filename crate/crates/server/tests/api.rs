use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use hearth::devices::http::{Auth, HttpEndpoint};
use hearth::orchestrator::{AgentBackend, CycleConfig, Mode, Session, Table};
use hearth::telemetry::DeviceType;
use hearth_server::{router, AppState, StreamEvent, StreamName};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn state() -> AppState {
    let config = CycleConfig {
        cycles: 6,
        ..CycleConfig::default()
    };
    AppState::new(Session::sim(config).unwrap(), Duration::ZERO)
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = send(app, method, uri, body).await;
    let v =
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: {e}: {}", String::from_utf8_lossy(&bytes)));
    (status, v)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn stream(app: &Router, name: &str, from: u64) -> Vec<StreamEvent> {
    let (status, bytes) = send(
        app,
        Method::GET,
        &format!("/stream/{name}?from={from}&follow=false"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    String::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[tokio::test]
async fn fresh_session_reads() {
    let app = router(state());
    let (s, v) = get(&app, "/chain/validate").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["valid"], true);

    let (_, v) = get(&app, "/chain").await;
    assert_eq!(v["length"], 1);
    let (s, v) = get(&app, "/chain/blocks/0").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["index"], 0);
    let (s, v) = get(&app, "/chain/blocks/99").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");

    let (_, v) = get(&app, "/agents").await;
    assert_eq!(v["agents"].as_array().unwrap().len(), 13);
    let (s, v) = get(&app, "/agents/climate-agent-001/stats").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["priority"], 0.5);
    assert_eq!(get(&app, "/agents/nobody/stats").await.0, StatusCode::NOT_FOUND);

    let (_, v) = get(&app, "/governance").await;
    assert_eq!(v["keys"].as_array().unwrap().len(), 27);
    let locked = v["keys"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|k| k["tier"] == "LOCKED")
        .count();
    assert_eq!(locked, 9);

    let (_, v) = get(&app, "/devices").await;
    assert_eq!(v["devices"].as_array().unwrap().len(), 16);
    let (s, v) = get(&app, "/devices/hvac-kitchen/telemetry").await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["latest"].is_null());
    assert_eq!(get(&app, "/devices/ghost/telemetry").await.0, StatusCode::NOT_FOUND);

    let (_, v) = get(&app, "/metrics").await;
    assert_eq!(v["cycle"], 0);
    assert_eq!(v["running"], false);

    let (s, _) = send(&app, Method::GET, "/stream/nonsense?follow=false", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn governance_writes() {
    let app = router(state());
    let (s, v) = call(
        &app,
        Method::PUT,
        "/governance/smoke_threshold",
        Some(json!({"value": 0.9})),
    )
    .await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert_eq!(v["tier"], "LOCKED");
    assert!(v["detail"].as_str().unwrap().contains("LOCKED"));

    let (s, v) = call(
        &app,
        Method::PUT,
        "/governance/target_temperature_c",
        Some(json!({"value": 23.0})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["verdict"], "allowed");
    assert_eq!(v["version"], 1);

    let (s, v) = call(
        &app,
        Method::PUT,
        "/governance/lighting_brightness_pct",
        Some(json!({"value": 150})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["rule_id"], "R02");
    assert_eq!(v["rule"]["max"], 100.0);

    let (s, _) = call(&app, Method::PUT, "/governance/no_such_key", Some(json!({"value": 1}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, v) = call(
        &app,
        Method::PUT,
        "/governance/target_temperature_c",
        Some(json!({"wrong": 1})),
    )
    .await;
    assert!(s.is_client_error());
    assert_eq!(v["error"], "malformed_body");

    let (s, v) = call(
        &app,
        Method::PUT,
        "/governance/comfort_vs_energy",
        Some(json!({"value": 1.0})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["requires_confirmation"], true);
    let (_, g) = get(&app, "/governance").await;
    assert_eq!(g["values"]["target_temperature_c"], 23.0);
    assert!(g["priorities"]["climate-agent-001"].as_f64().unwrap() > 0.5);

    // Every attempt, denied and invalid included, is on the governance stream.
    let events = stream(&app, "governance", 0).await;
    let verdicts: Vec<&str> = events.iter().map(|e| e.payload["verdict"].as_str().unwrap()).collect();
    assert_eq!(verdicts, ["denied", "allowed", "invalid", "allowed"]);
}

#[tokio::test]
async fn commands_and_faults() {
    let st = state();
    let app = router(st.clone());
    let (s, v) = call(
        &app,
        Method::POST,
        "/commands",
        Some(json!({"text": "I prefer comfort over energy savings"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["outcome"]["kind"], "preference");
    assert_eq!(v["verdict"]["verdict"], "allowed");
    let gov = stream(&app, "governance", 0).await;
    assert_eq!(gov.len(), 1);
    assert_eq!(gov[0].payload["key"], "comfort_vs_energy");
    assert_eq!(gov[0].payload["new_value"], 0.75);

    let (s, v) = call(
        &app,
        Method::POST,
        "/commands",
        Some(json!({"text": "turn off the kitchen light"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["queued_for_cycle"], 1);
    let (s, v) = call(&app, Method::POST, "/commands", Some(json!({"text": "make coffee"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "unrecognized_command");

    let (s, v) = call(&app, Method::POST, "/faults", Some(json!({"kind": "smoke"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["start_cycle"], 1);
    let (s, _) = call(&app, Method::POST, "/faults", Some(json!({"kind": "meteor"}))).await;
    assert!(s.is_client_error());

    let (s, v) = call(
        &app,
        Method::POST,
        "/session/start",
        Some(json!({"cycles": 2, "wait": true})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["cycle"], 2);

    let decisions = stream(&app, "decisions", 0).await;
    let light = decisions
        .iter()
        .find(|e| e.payload["agent_id"] == "nlu-agent-001")
        .expect("resident command reached the decision pool");
    assert_eq!(light.payload["device_id"], "light-kitchen");
    assert_eq!(light.payload["status"], "committed");

    let (_, blocks) = get(&app, "/chain").await;
    let kinds: Vec<&str> = blocks["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"emergency"), "{kinds:?}");

    let (s, v) = call(&app, Method::POST, "/session/stop", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["chain_valid"], true);
    let (s, v) = call(&app, Method::POST, "/session/start", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "session_finished");
}

#[tokio::test]
async fn real_mode_refuses_faults() {
    let config = CycleConfig {
        mode: Mode::Real,
        ..CycleConfig::default()
    };
    let endpoints = vec![HttpEndpoint {
        device_id: "hvac-office".into(),
        room: "office".into(),
        device_type: DeviceType::Hvac,
        url: "http://127.0.0.1:9/hvac".into(),
        auth: Auth::None,
    }];
    let session = Session::for_mode(config, endpoints, AgentBackend::default()).unwrap();
    let app = router(AppState::new(session, Duration::ZERO));
    let (s, v) = call(&app, Method::POST, "/faults", Some(json!({"kind": "smoke"}))).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert_eq!(v["mode"], "real");
    let (_, v) = get(&app, "/devices").await;
    assert_eq!(v["devices"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn streams_mirror_the_store_and_gets_do_not_write() {
    let st = state();
    let app = router(st.clone());
    call(
        &app,
        Method::POST,
        "/faults",
        Some(json!({"kind": "cascading_emergency", "start_cycle": 2})),
    )
    .await;
    call(&app, Method::POST, "/session/start", Some(json!({"wait": true}))).await;

    let before = st.session().await.store().clone();
    for uri in [
        "/chain",
        "/chain/blocks/1",
        "/chain/validate",
        "/agents",
        "/agents/safety-agent-001/stats",
        "/governance",
        "/devices",
        "/devices/smoke-kitchen/telemetry",
        "/metrics",
    ] {
        assert_eq!(get(&app, uri).await.0, StatusCode::OK, "{uri}");
    }
    for name in StreamName::ALL {
        stream(&app, name.as_str(), 0).await;
    }
    assert_eq!(*st.session().await.store(), before);

    for name in StreamName::ALL {
        let events = stream(&app, name.as_str(), 0).await;
        let seqs: Vec<u64> = events.iter().map(|e| e.sequence).collect();
        assert_eq!(seqs, (0..events.len() as u64).collect::<Vec<_>>(), "{name}");
        {
            let s = st.session().await;
            match name.table() {
                Some(t) => {
                    let bodies: Vec<Value> = s.store().records(t, 0).into_iter().map(|r| r.body).collect();
                    let payloads: Vec<Value> = events.iter().map(|e| e.payload.clone()).collect();
                    assert_eq!(payloads, bodies, "{name}");
                }
                None => {
                    assert_eq!(events.len(), s.blocks().len());
                    for (e, b) in events.iter().zip(s.blocks()) {
                        assert_eq!(e.payload["block_hash"], b.block_hash.to_hex());
                    }
                }
            }
        }
        if let Some(mid) = events.get(events.len() / 2) {
            let tail = stream(&app, name.as_str(), mid.sequence).await;
            assert_eq!(tail[0], *mid);
            assert_eq!(tail.len(), events.len() - mid.sequence as usize);
        }
    }
    let s = st.session().await;
    assert_eq!(s.store().len(Table::Telemetry), 12);
    assert!(s.store().len(Table::Conflicts) + s.store().len(Table::Decisions) > 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn followed_stream_sees_every_block_once() {
    let st = state();
    let app = router(st.clone());
    let follower = {
        let app = app.clone();
        tokio::spawn(async move {
            let req = Request::get("/stream/blocks").body(Body::empty()).unwrap();
            let resp = app.oneshot(req).await.unwrap();
            resp.into_body().collect().await.unwrap().to_bytes()
        })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    call(&app, Method::POST, "/session/start", Some(json!({"cycles": 4}))).await;
    st.join().await;
    call(&app, Method::POST, "/session/stop", None).await;

    let body = tokio::time::timeout(Duration::from_secs(30), follower)
        .await
        .unwrap()
        .unwrap();
    let events: Vec<StreamEvent> = std::str::from_utf8(&body)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let s = st.session().await;
    assert_eq!(events.len(), s.blocks().len());
    assert!(events.windows(2).all(|w| w[1].sequence == w[0].sequence + 1));
    assert_eq!(events.last().unwrap().payload["kind"], "anchor");
    assert_eq!(events.last().unwrap().payload["tx_count"], 1);
}
