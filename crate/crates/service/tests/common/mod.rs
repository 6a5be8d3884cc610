#![allow(dead_code)]

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const TITANIC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/titanic.csv");

pub async fn send(app: &Router, method: &str, uri: &str, content_type: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", content_type).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let bytes = body.map(|b| b.to_string().into_bytes()).unwrap_or_default();
    let (status, out) = send(app, method, uri, "application/json", bytes).await;
    (status, serde_json::from_slice(&out).unwrap_or(Value::Null))
}

/// Polls a job until it ends; every poll's revision is appended to `revisions`.
pub async fn wait_job(app: &Router, id: &str, revisions: &mut Vec<u64>) -> Result<Value, String> {
    for _ in 0..1200 {
        let (status, body) = call(app, "GET", &format!("/api/v1/jobs/{id}"), None).await;
        if status != StatusCode::OK {
            return Err(format!("job poll answered {status}"));
        }
        revisions.push(body["revision"].as_u64().unwrap_or(0));
        match body["job"]["status"].as_str() {
            Some("done") => return Ok(body["job"].clone()),
            Some("failed") => return Err(format!("job {id} failed: {}", body["job"]["error"])),
            _ => tokio::time::sleep(Duration::from_millis(25)).await,
        }
    }
    Err(format!("job {id} did not finish"))
}
