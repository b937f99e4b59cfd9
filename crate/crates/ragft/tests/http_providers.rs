use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use ragft::config::{ProviderConfig, ProviderKind};
use ragft::http::{CohereReranker, OpenAiChat, OpenAiEmbedder};
use ragft_core::provider::Candidate;
use ragft_core::{ChatModel, Embedder, Message, ProviderError, Reranker};
use serde_json::{json, Value};

#[derive(Default)]
struct Server {
    embed_calls: AtomicUsize,
    chat_calls: AtomicUsize,
    rerank_calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    auth: Mutex<Vec<String>>,
    fail_embeds: AtomicUsize,
}

type Shared = Arc<Server>;

async fn embeddings(State(s): State<Shared>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    s.embed_calls.fetch_add(1, Ordering::SeqCst);
    if s.fail_embeds.load(Ordering::SeqCst) > 0 {
        s.fail_embeds.fetch_sub(1, Ordering::SeqCst);
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": "busy" })));
    }
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.max_in_flight.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(40)).await;
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
    let data: Vec<Value> = body["input"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({ "index": i, "embedding": [t.as_str().unwrap().len() as f64, 1.0, 0.0] }))
        .collect();
    (StatusCode::OK, Json(json!({ "data": data })))
}

async fn chat(State(s): State<Shared>, headers: HeaderMap) -> (StatusCode, Json<Value>) {
    let n = s.chat_calls.fetch_add(1, Ordering::SeqCst);
    if let Some(v) = headers.get("authorization") {
        s.auth.lock().unwrap().push(v.to_str().unwrap().to_string());
    }
    if n == 0 {
        return (StatusCode::TOO_MANY_REQUESTS, Json(json!({ "error": "slow down" })));
    }
    (StatusCode::OK, Json(json!({ "choices": [{ "message": { "role": "assistant", "content": "fine" } }] })))
}

async fn rerank(State(s): State<Shared>) -> (StatusCode, Json<Value>) {
    s.rerank_calls.fetch_add(1, Ordering::SeqCst);
    (StatusCode::BAD_REQUEST, Json(json!({ "error": "bad model" })))
}

fn start() -> (Shared, String) {
    let state: Shared = Arc::default();
    let app = Router::new()
        .route("/embeddings", post(embeddings))
        .route("/chat/completions", post(chat))
        .route("/rerank", post(rerank))
        .with_state(state.clone());
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (state, format!("http://{addr}"))
}

fn config(endpoint: &str) -> ProviderConfig {
    ProviderConfig {
        kind: ProviderKind::Openai,
        endpoint: endpoint.into(),
        model_name: "test-model".into(),
        max_retries: 3,
        max_concurrency: 2,
        batch_size: 2,
        backoff_base_ms: 5,
        backoff_cap_ms: 20,
        timeout_secs: 10.0,
        ..ProviderConfig::default()
    }
}

#[test]
fn embedder_retries_server_errors_and_caps_concurrency() {
    let (server, url) = start();
    server.fail_embeds.store(2, Ordering::SeqCst);
    let emb = OpenAiEmbedder::new(&config(&url)).unwrap();
    let texts = ["a", "bb", "ccc", "dddd", "eeeee", "ffffff", "g", "hh"];
    let vectors = emb.embed(&texts).unwrap();
    assert_eq!(vectors.len(), 8);
    // Out-of-order response items are put back in input order.
    let v = vectors[3].values();
    assert!((v[0] / v[1] - 4.0).abs() < 1e-12);
    assert_eq!(server.embed_calls.load(Ordering::SeqCst), 4 + 2);
    assert!(server.max_in_flight.load(Ordering::SeqCst) <= 2);
}

#[test]
fn embedder_gives_up_after_max_retries() {
    let (server, url) = start();
    server.fail_embeds.store(100, Ordering::SeqCst);
    let mut cfg = config(&url);
    cfg.max_retries = 2;
    let err = OpenAiEmbedder::new(&cfg).unwrap().embed(&["x"]).unwrap_err();
    assert!(matches!(err, ProviderError::Exhausted { attempts: 3, .. }), "{err:?}");
    assert_eq!(server.embed_calls.load(Ordering::SeqCst), 3);
}

#[test]
fn chat_retries_rate_limit_and_sends_key_from_env() {
    let (server, url) = start();
    std::env::set_var("RAGFT_TEST_CHAT_KEY", "sk-test-123");
    let mut cfg = config(&url);
    cfg.api_key_env = Some("RAGFT_TEST_CHAT_KEY".into());
    let chat = OpenAiChat::new(&cfg).unwrap();
    let reply = chat.chat(&[Message::user("hello")]).unwrap();
    assert_eq!(reply, "fine");
    assert_eq!(server.chat_calls.load(Ordering::SeqCst), 2);
    assert!(server.auth.lock().unwrap().iter().all(|a| a == "Bearer sk-test-123"));
}

#[test]
fn missing_key_variable_is_a_config_error() {
    let mut cfg = config("http://127.0.0.1:9");
    cfg.api_key_env = Some("RAGFT_TEST_UNSET_KEY".into());
    std::env::remove_var("RAGFT_TEST_UNSET_KEY");
    assert!(OpenAiChat::new(&cfg).is_err());
}

#[test]
fn client_errors_are_not_retried() {
    let (server, url) = start();
    let mut cfg = config(&url);
    cfg.kind = ProviderKind::Cohere;
    let rr = CohereReranker::new(&cfg).unwrap();
    let candidates = [Candidate { id: "a", text: "alpha" }, Candidate { id: "b", text: "beta" }];
    let err = rr.rerank("q", &candidates, 1).unwrap_err();
    assert!(matches!(err, ProviderError::Exhausted { attempts: 1, .. }), "{err:?}");
    assert_eq!(server.rerank_calls.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_is_retried_then_reported() {
    let mut cfg = config("http://127.0.0.1:9");
    cfg.max_retries = 1;
    let err = OpenAiChat::new(&cfg).unwrap().chat(&[Message::user("hi")]).unwrap_err();
    assert!(matches!(err, ProviderError::Exhausted { attempts: 2, .. }), "{err:?}");
}
