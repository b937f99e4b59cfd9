mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use ragft::datasetgen::ChatRecord;
use ragft::service::{router, ItemView, QueueEntry, ServiceState};
use ragft::{ProviderSet, Stage};
use ragft_core::quotes::extract_quotes;
use ragft_core::review::ReviewStats;
use serde_json::{json, Value};
use tower::ServiceExt;

fn setup(dir: &std::path::Path) -> (Stage, Router) {
    let fx = common::write_fixture(&dir.join("fixture"));
    let mut cfg = common::test_config(42);
    cfg.review_fraction = 1.0;
    let stage = common::run_pipeline_with(&fx, &dir.join("work"), cfg);
    let engine = stage.query_engine(&ProviderSet::mock()).unwrap();
    let state = ServiceState::load(&stage.paths, Some(engine)).unwrap();
    (stage, router(Arc::new(state), None))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = setup(dir.path());
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");

    let q = json!({ "question": "Does the user documentation contain a hazard log?" });
    let (status, body) = call(&app, "POST", "/query", Some(q)).await;
    assert_eq!(status, StatusCode::OK);
    let docs = body["retrieved_docs"].as_array().unwrap();
    assert!(!docs.is_empty() && docs.len() <= 4);
    assert!(body["retrieved_ctx"].as_array().unwrap().len() <= 4);
    assert!(!body["quotes"].as_array().unwrap().is_empty());
    assert_eq!(body["unmatched_fraction"], 0.0);
}

#[tokio::test]
async fn review_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (stage, app) = setup(dir.path());
    let (status, body) = call(&app, "GET", "/review/queue", None).await;
    assert_eq!(status, StatusCode::OK);
    let queue: Vec<QueueEntry> = serde_json::from_value(body).unwrap();
    assert!(queue.len() >= 10, "sample has {} items", queue.len());

    let mut edited = String::new();
    let mut edited_id = String::new();
    for (i, entry) in queue.iter().take(10).enumerate() {
        let uri = format!("/review/item/{}", entry.instance_id);
        let (_, item) = call(&app, "GET", &uri, None).await;
        let item: ItemView = serde_json::from_value(item).unwrap();
        let decision = match i {
            0 | 1 => {
                let quote = &extract_quotes(&item.answer)[0];
                let answer = format!(
                    "Reviewer reasoning: the first golden block answers the question directly.\n\n\
                     ##begin_quote##{quote}##end_quote##\n\nSummary: the quoted passage is sufficient."
                );
                if i == 0 {
                    edited = answer.clone();
                    edited_id = entry.instance_id.clone();
                }
                json!({ "status": if i == 0 { "minor_edit" } else { "major_edit" }, "edited_answer": answer, "reviewer": "r1" })
            }
            2 => {
                let answer = format!("{}\n(checked)", item.answer);
                json!({ "status": "minor_edit", "edited_answer": answer, "reviewer": "r1" })
            }
            _ => json!({ "status": "accepted", "reviewer": "r1" }),
        };
        let (status, _) = call(&app, "POST", &format!("{uri}/decision"), Some(decision)).await;
        assert_eq!(status, StatusCode::OK);
    }

    let (_, stats) = call(&app, "GET", "/review/stats", None).await;
    let stats: ReviewStats = serde_json::from_value(stats).unwrap();
    assert_eq!(stats.reviewed, 10);
    assert!((stats.modified_fraction - 0.3).abs() < 1e-12);

    // A second decision on the same item keeps both in the history.
    let uri = format!("/review/item/{}", queue[5].instance_id);
    call(&app, "POST", &format!("{uri}/decision"), Some(json!({ "status": "accepted", "reviewer": "r2" }))).await;
    let (_, item) = call(&app, "GET", &uri, None).await;
    assert_eq!(item["history"].as_array().unwrap().len(), 2);

    let (status, _) = call(&app, "GET", "/review/item/nope-g001", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) =
        call(&app, "POST", "/review/item/nope-g001/decision", Some(json!({ "status": "accepted", "reviewer": "r" })))
            .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let bad = json!({ "status": "minor_edit", "reviewer": "r" });
    let (status, _) = call(&app, "POST", &format!("{uri}/decision"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, summary) = call(&app, "GET", "/dataset/summary", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["reviewed"], 10);

    stage.export(false, true).unwrap();
    let meta: ragft::datasetgen::ExportMeta = ragft::io::read_json(&stage.paths.export_meta).unwrap();
    let text = std::fs::read_to_string(&stage.paths.export).unwrap();
    let line = meta.lines.iter().position(|l| l.instance_id == edited_id).expect("edited instance exported");
    let record: ChatRecord = serde_json::from_str(text.lines().nth(line).unwrap()).unwrap();
    assert_eq!(record.messages[2].content, edited);
    assert!(stage.verify().unwrap().is_empty());
}

#[tokio::test]
async fn decisions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (stage, app) = setup(dir.path());
    let (_, body) = call(&app, "GET", "/review/queue", None).await;
    let id = body[0]["instance_id"].as_str().unwrap().to_string();
    call(&app, "POST", &format!("/review/item/{id}/decision"), Some(json!({ "status": "rejected", "reviewer": "r" })))
        .await;
    drop(app);
    let state = ServiceState::load(&stage.paths, None).unwrap();
    let app = router(Arc::new(state), None);
    let (_, item) = call(&app, "GET", &format!("/review/item/{id}"), None).await;
    assert_eq!(item["review_status"], "rejected");
    let (status, _) = call(&app, "POST", "/query", Some(json!({ "question": "x" }))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}
