use std::path::Path;
use std::sync::Arc;

use aclwright::service::{router, AppState, ServiceConfig};
use aclwright_core::comprehension::{BackendConfig, MockBackend};
use aclwright_core::deploy::Limits;
use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(data: &Path) -> Router {
    let cfg = ServiceConfig { data_dir: data.to_path_buf(), backend: BackendConfig::default(), limits: Limits::default() };
    router(AppState::new(cfg, Arc::new(MockBackend::new())))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into())) };
    (status, v)
}

async fn new_session(app: &Router, template: &str) -> String {
    let (st, v) = call(app, "POST", "/sessions", Some(json!({ "template": template }))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn approve_on_unknown_session_is_not_found() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());
    for uri in ["/intents/s9-0/approve", "/intents/nonsense/approve", "/intents/..-0/approve"] {
        let (st, v) = call(&app, "POST", uri, None).await;
        assert_eq!(st, StatusCode::NOT_FOUND, "{uri}: {v}");
        assert!(v["error"].is_string());
    }
    let sid = new_session(&app, "fig2").await;
    let (st, _) = call(&app, "POST", &format!("/intents/{sid}-7/approve"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn full_interactive_loop_on_fig2() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());
    let sid = new_session(&app, "fig2").await;

    let (st, v) =
        call(&app, "POST", &format!("/sessions/{sid}/intents"), Some(json!({ "text": "Permit all traffic from DC2 to any destination." })))
            .await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    assert_eq!(v["stage"], "awaiting-review");
    assert_eq!(v["round"], 0);
    assert_eq!(v["ir"]["source"]["name"], "DC2");
    let iid = v["intent_id"].as_str().unwrap().to_string();

    let (st, v) = call(&app, "GET", &format!("/intents/{iid}/conflicts"), None).await;
    assert_eq!(st, StatusCode::CONFLICT, "conflicts before approval: {v}");

    let (st, v) = call(&app, "POST", &format!("/intents/{iid}/feedback"), Some(json!({ "feedback": "destination should be any" }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["round"], 1);
    assert_eq!(v["stage"], "awaiting-review");

    let (st, v) = call(&app, "POST", &format!("/intents/{iid}/approve"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["stage"], "approved");
    assert_eq!(v["rules"].as_array().unwrap().len(), 1);

    let (st, v) = call(&app, "POST", &format!("/intents/{iid}/feedback"), Some(json!({ "feedback": "x" }))).await;
    assert_eq!(st, StatusCode::CONFLICT, "feedback after approval: {v}");

    let (st, v) = call(&app, "GET", &format!("/intents/{iid}/conflicts"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let rows = v["conflicts"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["interface"], "R_B@2");
    assert_eq!(v["stage"], "resolving");

    let (st, v) = call(&app, "GET", &format!("/sessions/{sid}/plan"), None).await;
    assert_eq!(st, StatusCode::CONFLICT, "plan while resolving: {v}");

    let (st, v) = call(&app, "POST", &format!("/intents/{iid}/protect"), Some(json!({}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["stage"], "resolved");
    assert_eq!(v["protect_flow_count"], 0);

    let (st, v) = call(&app, "GET", &format!("/sessions/{sid}/plan?strategy=bogus"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");
    let (st, v) = call(&app, "GET", &format!("/sessions/{sid}/plan?strategy=endpoint"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let (st, v) = call(&app, "GET", &format!("/sessions/{sid}/plan?strategy=xumi"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["strategy"], "optimized");
    assert_eq!(v["objective"], 1);

    let (st, v) = call(&app, "GET", &format!("/sessions/{sid}/verification"), None).await;
    assert_eq!(st, StatusCode::CONFLICT, "verification before apply: {v}");

    let (st, v) = call(&app, "POST", &format!("/sessions/{sid}/apply"), Some(json!({ "strategy": "optimized" }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["plan"]["objective"], 1);

    let (st, v) = call(&app, "GET", &format!("/sessions/{sid}/verification"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert!(v["intents"].as_array().unwrap().iter().all(|r| r["status"] == "pass"));

    let (_, v) = call(&app, "GET", &format!("/sessions/{sid}"), None).await;
    assert_eq!(v["intents"][0]["stage"], "verified");
}

#[tokio::test]
async fn protect_text_is_comprehended() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());
    let sid = new_session(&app, "protect").await;
    let (_, v) = call(&app, "POST", &format!("/sessions/{sid}/intents"), Some(json!({ "text": "Permit TCP traffic from any source to any destination." }))).await;
    let iid = v["intent_id"].as_str().unwrap().to_string();
    call(&app, "POST", &format!("/intents/{iid}/approve"), None).await;
    let (_, v) = call(&app, "GET", &format!("/intents/{iid}/conflicts"), None).await;
    assert!(!v["conflicts"].as_array().unwrap().is_empty(), "{v}");
    let (st, v) = call(&app, "POST", &format!("/intents/{iid}/protect"), Some(json!({ "text": "Protect all HTTP traffic." }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert!(v["protect_flow_count"].as_u64().unwrap() > 0);
    assert!(v["resolved"]["protect_rules"].as_array().unwrap().iter().all(|r| r["action"] == "deny"), "{v}");
    let (st, v) = call(&app, "POST", &format!("/sessions/{sid}/apply"), None).await;
    assert_eq!(st, StatusCode::CONFLICT, "apply with no plan: {v}");
    call(&app, "GET", &format!("/sessions/{sid}/plan"), None).await;
    let (st, v) = call(&app, "POST", &format!("/sessions/{sid}/apply"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert!(v["verification"]["intents"].as_array().unwrap().iter().all(|r| r["status"] == "pass"), "{v}");
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let first = app(tmp.path());
    let a = new_session(&first, "fig3").await;
    let (_, v) = call(&first, "POST", &format!("/sessions/{a}/intents"), Some(json!({ "text": "Deny TCP traffic from a to any destination." }))).await;
    let iid = v["intent_id"].as_str().unwrap().to_string();

    let second = app(tmp.path());
    let (st, v) = call(&second, "POST", &format!("/intents/{iid}/approve"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let b = new_session(&second, "fig3").await;
    assert_ne!(a, b);
}

#[tokio::test]
async fn bad_bodies_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(tmp.path());
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({ "template": "nowhere" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({ "template": "/etc/passwd.json" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let sid = new_session(&app, "fig2").await;
    let (st, _) = call(&app, "POST", &format!("/sessions/{sid}/intents"), Some(json!({ "text": "  " }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "POST", &format!("/sessions/{sid}/intents"), Some(json!({ "words": "hi" }))).await;
    assert!(st.is_client_error());
}
