//! Drives the HTTP service in-process: replay a canned case, then start a
//! fresh session and answer the causality question.
//!
//! `cargo run --release --example service`

use axum::body::Body;
use axum::http::{header, Request};
use http_body_util::BodyExt;
use shiftscope::service::{router, App, ServiceConfig};
use tower::ServiceExt;

const TOKEN: &str = "example-token";

async fn call(app: &std::sync::Arc<App>, method: &str, path: &str, body: &str) -> serde_json::Value {
    let req = Request::builder()
        .method(method)
        .uri(format!("/api/v1{path}"))
        .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    println!("{method} {path} -> {status}");
    serde_json::from_slice(&bytes).unwrap_or_default()
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let app = App::open(ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        token: TOKEN.into(),
        max_upload_bytes: 50 << 20,
        seed: 0,
        level: 0.05,
    })?;

    let canned = call(&app, "POST", "/sessions", r#"{"case": "heart-disease"}"#).await;
    let id = canned["session_id"].as_str().unwrap_or_default();
    let view = call(&app, "GET", &format!("/sessions/{id}"), "").await;
    println!("  step {}, diagnosis {}", view["step"], view["state"]["diagnosis"]["scenario"]);

    let fresh = call(&app, "POST", "/sessions", "").await;
    let id = fresh["session_id"].as_str().unwrap_or_default();
    let answered = call(&app, "POST", &format!("/sessions/{id}/answer"), r#"{"question": "causality", "value": "y_to_x"}"#).await;
    println!("  now at {}, allowed {}", answered["step"], answered["allowed_inputs"]);
    Ok(())
}
