//! Fault injection against a local chat-completions stub.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use proto_harness_core::gateway::{
    CompletionCache, CompletionRequest, Gateway, GatewayError, HttpBackend, HttpConfig, RetryPolicy,
    SamplingParams,
};
use proto_harness_core::prompt::{Message, StageKind};
use serde_json::{json, Value};

#[derive(Default)]
struct Stub {
    /// Status codes to return before falling back to 200.
    script: Mutex<VecDeque<u16>>,
    hits: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    delay_ms: u64,
    last_body: Mutex<Option<Value>>,
}

async fn handler(State(stub): State<Arc<Stub>>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    stub.hits.fetch_add(1, Ordering::SeqCst);
    let now = stub.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    stub.peak.fetch_max(now, Ordering::SeqCst);
    if stub.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(stub.delay_ms)).await;
    }
    stub.in_flight.fetch_sub(1, Ordering::SeqCst);
    *stub.last_body.lock().unwrap() = Some(body);
    let status = stub.script.lock().unwrap().pop_front().unwrap_or(200);
    if status != 200 {
        return (
            StatusCode::from_u16(status).unwrap(),
            Json(json!({"error": {"message": "injected"}})),
        );
    }
    (
        StatusCode::OK,
        Json(json!({
            "choices": [{"message": {"role": "assistant", "content": "1. coffee shop\n2. park"}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 6, "total_tokens": 18}
        })),
    )
}

async fn serve(stub: Arc<Stub>) -> SocketAddr {
    let app = Router::new()
        .route("/v1/chat/completions", post(handler))
        .with_state(stub);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

fn backend(addr: SocketAddr, max_attempts: u32) -> HttpBackend {
    let config = HttpConfig {
        endpoint: format!("http://{addr}/v1/chat/completions"),
        retry: RetryPolicy {
            max_attempts,
            base_delay: Duration::from_millis(5),
            max_delay: Duration::from_millis(20),
            jitter: true,
        },
        ..HttpConfig::default()
    };
    HttpBackend::with_api_key(config, "test-key").unwrap()
}

fn request(i: u32) -> CompletionRequest {
    CompletionRequest {
        messages: vec![Message::user(format!("Name a place number {i}."))],
        params: SamplingParams::default(),
        path_index: 0,
        sample_label: "rep-1".into(),
        question_id: format!("q{i}"),
        stage: StageKind::Answer,
    }
}

#[tokio::test]
async fn plain_success_sends_sampling_params() {
    let stub = Arc::new(Stub::default());
    let addr = serve(stub.clone()).await;
    let gw = Gateway::new(Arc::new(backend(addr, 5)), 4);
    let done = gw.complete(&request(0)).await.unwrap();
    assert_eq!(done.record.raw_text, "1. coffee shop\n2. park");
    assert_eq!(done.record.usage.unwrap().total_tokens, 18);
    let body = stub.last_body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], "gpt-3.5-turbo");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(body["top_p"], 0.95);
    assert_eq!(body["max_tokens"], 1024);
    assert_eq!(body["messages"][0]["role"], "user");
}

#[tokio::test]
async fn rate_limited_twice_then_succeeds() {
    let stub = Arc::new(Stub {
        script: Mutex::new(VecDeque::from([429, 429])),
        ..Stub::default()
    });
    let addr = serve(stub.clone()).await;
    let gw = Gateway::new(Arc::new(backend(addr, 5)), 4);
    let done = gw.complete(&request(0)).await.unwrap();
    assert_eq!(done.record.raw_text, "1. coffee shop\n2. park");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn attempts_are_bounded() {
    let stub = Arc::new(Stub {
        script: Mutex::new(VecDeque::from(vec![429; 50])),
        ..Stub::default()
    });
    let addr = serve(stub.clone()).await;
    let gw = Gateway::new(Arc::new(backend(addr, 5)), 4);
    let err = gw.complete(&request(0)).await.unwrap_err();
    assert_eq!(err, GatewayError::RateLimited { attempts: 5 });
    assert_eq!(stub.hits.load(Ordering::SeqCst), 5);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let stub = Arc::new(Stub {
        script: Mutex::new(VecDeque::from([400])),
        ..Stub::default()
    });
    let addr = serve(stub.clone()).await;
    let gw = Gateway::new(Arc::new(backend(addr, 5)), 4);
    let err = gw.complete(&request(0)).await.unwrap_err();
    assert!(matches!(err, GatewayError::Api { status: 400, .. }));
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn server_errors_are_retried() {
    let stub = Arc::new(Stub {
        script: Mutex::new(VecDeque::from([503])),
        ..Stub::default()
    });
    let addr = serve(stub.clone()).await;
    let gw = Gateway::new(Arc::new(backend(addr, 5)), 4);
    gw.complete(&request(0)).await.unwrap();
    assert_eq!(stub.hits.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn connection_refused_is_a_network_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let gw = Gateway::new(Arc::new(backend(addr, 2)), 4);
    assert!(matches!(
        gw.complete(&request(0)).await.unwrap_err(),
        GatewayError::Network(_)
    ));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn in_flight_requests_are_bounded() {
    let stub = Arc::new(Stub {
        delay_ms: 40,
        ..Stub::default()
    });
    let addr = serve(stub.clone()).await;
    let gw = Arc::new(Gateway::new(Arc::new(backend(addr, 5)), 3));
    let tasks: Vec<_> = (0..12)
        .map(|i| {
            let gw = gw.clone();
            tokio::spawn(async move { gw.complete(&request(i)).await })
        })
        .collect();
    for t in tasks {
        t.await.unwrap().unwrap();
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 12);
    let peak = stub.peak.load(Ordering::SeqCst);
    assert!(peak <= 3, "peak in-flight {peak}");
    assert!(peak >= 2, "requests never overlapped");
}

#[tokio::test]
async fn warm_cache_makes_no_network_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("completions.jsonl");
    let stub = Arc::new(Stub::default());
    let addr = serve(stub.clone()).await;

    let cold = Gateway::new(Arc::new(backend(addr, 5)), 4)
        .with_cache(Arc::new(CompletionCache::open(&cache_path).unwrap()));
    let mut first = Vec::new();
    for i in 0..5 {
        first.push(cold.complete(&request(i)).await.unwrap().record);
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 5);

    let warm = Gateway::new(Arc::new(backend(addr, 5)), 4)
        .with_cache(Arc::new(CompletionCache::open(&cache_path).unwrap()));
    for (i, before) in first.iter().enumerate() {
        let again = warm.complete(&request(i as u32)).await.unwrap();
        assert!(again.cached);
        assert_eq!(&again.record, before);
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 5);
    assert_eq!(warm.backend_calls(), 0);
}

#[test]
fn missing_credential_fails_before_any_request() {
    let config = HttpConfig {
        credential_env: "PROTO_HARNESS_TEST_UNSET_VARIABLE".into(),
        endpoint: "http://127.0.0.1:9/never".into(),
        ..HttpConfig::default()
    };
    assert!(matches!(HttpBackend::from_env(config), Err(GatewayError::Config(_))));
}
