use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use alex_core::iqs::synthesize_for_edit;
use alex_core::pipeline::build_memory;
use alex_core::provider::{
    embed_one, embed_texts, generate_questions, mock_embed, template_questions, Provenance,
    Provider, ProviderConfig, ProviderKind, QuestionCache, RemoteProvider, DEFAULT_TEMPERATURE,
};
use alex_core::{EngineConfig, KMode};
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

/// Behaviour knobs of the stand-in sidecar.
#[derive(Default)]
struct Stub {
    dim: usize,
    /// Dimension claimed in responses, if different from `dim`.
    reported_dim: Option<usize>,
    /// Multiplies every returned vector.
    scale: Mutex<f64>,
    /// Requests to answer with HTTP 500 before behaving.
    failures_left: AtomicUsize,
    embed_hits: AtomicUsize,
    generate_hits: AtomicUsize,
    last_generate: Mutex<Option<Value>>,
}

#[derive(Deserialize)]
struct EmbedBody {
    texts: Vec<String>,
}

fn fail_if_scheduled(stub: &Stub) -> Result<(), StatusCode> {
    let left = stub.failures_left.load(Ordering::SeqCst);
    if left > 0 {
        stub.failures_left.store(left - 1, Ordering::SeqCst);
        return Err(StatusCode::INTERNAL_SERVER_ERROR);
    }
    Ok(())
}

async fn embed(
    State(stub): State<Arc<Stub>>,
    Json(body): Json<EmbedBody>,
) -> Result<Json<Value>, StatusCode> {
    stub.embed_hits.fetch_add(1, Ordering::SeqCst);
    fail_if_scheduled(&stub)?;
    let scale = *stub.scale.lock().unwrap();
    let embeddings: Vec<Vec<f64>> = body
        .texts
        .iter()
        .map(|t| {
            mock_embed(t, stub.dim, 0)
                .into_iter()
                .map(|x| x * scale)
                .collect()
        })
        .collect();
    Ok(Json(json!({
        "dim": stub.reported_dim.unwrap_or(stub.dim),
        "embeddings": embeddings,
    })))
}

async fn generate(
    State(stub): State<Arc<Stub>>,
    Json(body): Json<Value>,
) -> Result<Json<Value>, StatusCode> {
    stub.generate_hits.fetch_add(1, Ordering::SeqCst);
    fail_if_scheduled(&stub)?;
    let fact = body["fact"].as_str().unwrap_or_default().to_string();
    let n = body["n"].as_u64().unwrap_or(0) as usize;
    *stub.last_generate.lock().unwrap() = Some(body);
    Ok(Json(json!({ "questions": template_questions(&fact, n) })))
}

struct Sidecar {
    url: String,
    stub: Arc<Stub>,
}

/// Serves the stub on an ephemeral port from a background runtime.
fn spawn(stub: Stub) -> Sidecar {
    let stub = Arc::new(stub);
    let state = Arc::clone(&stub);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(1)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new()
                .route("/embed", post(embed))
                .route("/generate", post(generate))
                .with_state(state);
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    Sidecar {
        url: format!("http://{addr}"),
        stub,
    }
}

fn stub(dim: usize) -> Stub {
    Stub {
        dim,
        scale: Mutex::new(1.0),
        ..Stub::default()
    }
}

fn client(sidecar: &Sidecar, dim: usize) -> RemoteProvider {
    RemoteProvider::new(&sidecar.url, dim, Duration::from_secs(5)).unwrap()
}

#[test]
fn embeds_unit_vectors_of_the_configured_dimension() {
    let sidecar = spawn(stub(768));
    let remote = client(&sidecar, 768);
    let vs = embed_texts(&remote, &["Paris is in France", "Berlin is in Germany"]).unwrap();
    assert_eq!(vs.len(), 2);
    for v in &vs {
        assert_eq!(v.len(), 768);
        assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-6);
    }
    let expected = mock_embed("Paris is in France", 768, 0);
    assert!(vs[0]
        .iter()
        .zip(&expected)
        .all(|(a, b)| (a - b).abs() < 1e-12));
    assert_eq!(remote.request_count(), 1);
    assert_eq!(remote.kind(), ProviderKind::Remote);
}

#[test]
fn dimension_mismatch_is_a_provider_error() {
    let sidecar = spawn(Stub {
        reported_dim: Some(384),
        ..stub(16)
    });
    let err = embed_one(&client(&sidecar, 16), "text").unwrap_err();
    assert!(err.is_provider(), "{err}");

    let sidecar = spawn(stub(8));
    let err = embed_one(&client(&sidecar, 16), "text").unwrap_err();
    assert!(err.is_provider(), "{err}");
}

#[test]
fn near_unit_vectors_are_renormalized_and_others_rejected() {
    let sidecar = spawn(stub(16));
    *sidecar.stub.scale.lock().unwrap() = 1.0 + 1e-4;
    let remote = client(&sidecar, 16);
    let v = embed_one(&remote, "text").unwrap();
    assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);

    *sidecar.stub.scale.lock().unwrap() = 1.1;
    assert!(embed_one(&remote, "text").unwrap_err().is_provider());
}

#[test]
fn transient_failures_are_retried() {
    let sidecar = spawn(stub(16));
    sidecar.stub.failures_left.store(2, Ordering::SeqCst);
    let remote = client(&sidecar, 16);
    embed_one(&remote, "text").unwrap();
    assert_eq!(remote.request_count(), 3);
    assert_eq!(sidecar.stub.embed_hits.load(Ordering::SeqCst), 3);

    sidecar.stub.failures_left.store(10, Ordering::SeqCst);
    let err = embed_one(&remote, "text").unwrap_err();
    assert!(err.is_provider());
    assert_eq!(remote.request_count(), 6);
}

#[test]
fn unreachable_sidecar_is_a_provider_error() {
    // Bind and drop to obtain a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let remote = RemoteProvider::new(
        &format!("http://127.0.0.1:{port}"),
        8,
        Duration::from_millis(500),
    )
    .unwrap();
    assert!(embed_one(&remote, "text").unwrap_err().is_provider());
}

#[test]
fn generation_is_cached_after_the_first_request() {
    let sidecar = spawn(stub(16));
    let remote = client(&sidecar, 16);
    let cache = QuestionCache::in_memory();
    let fact = "The Eiffel Tower is located in Paris";

    let (qs, provenance) = generate_questions(&remote, Some(&cache), fact, 3).unwrap();
    assert_eq!(qs.len(), 3);
    assert_eq!(provenance, Provenance::Remote);
    let body = sidecar.stub.last_generate.lock().unwrap().clone().unwrap();
    assert_eq!(body["n"], 3);
    assert_eq!(body["temperature"], DEFAULT_TEMPERATURE);
    assert_eq!(body["fact"], fact);

    let requests = remote.request_count();
    let (again, provenance) = generate_questions(&remote, Some(&cache), fact, 3).unwrap();
    assert_eq!(again, qs);
    assert_eq!(provenance, Provenance::Cache);
    assert_eq!(remote.request_count(), requests);
    assert_eq!(sidecar.stub.generate_hits.load(Ordering::SeqCst), 1);
}

#[test]
fn build_and_resynthesize_through_the_sidecar() {
    let sidecar = spawn(stub(32));
    let cfg = ProviderConfig {
        kind: ProviderKind::Remote,
        endpoint: Some(sidecar.url.clone()),
        dim: 32,
        timeout_ms: 5_000,
        cache_path: None,
        seed: 0,
    };
    let provider = cfg.connect().unwrap();
    let cache = QuestionCache::in_memory();
    let texts: Vec<String> = (0..12)
        .map(|i| format!("The Landmark{i} of Region{} is located in City{i}", i % 3))
        .collect();
    let engine = EngineConfig {
        k_mode: KMode::Fixed { k: 3 },
        ..EngineConfig::default()
    };
    let (mut memory, report) =
        build_memory(&texts, engine, cfg.clone(), provider.as_ref(), Some(&cache)).unwrap();
    assert_eq!(report.clustering.k, 3);
    assert_eq!(memory.provider, cfg);
    let generated = sidecar.stub.generate_hits.load(Ordering::SeqCst);
    let embedded = sidecar.stub.embed_hits.load(Ordering::SeqCst);

    let set = synthesize_for_edit(&mut memory, 4, provider.as_ref(), Some(&cache)).unwrap();
    assert_eq!(set.provenance, Provenance::Cache);
    assert_eq!(sidecar.stub.generate_hits.load(Ordering::SeqCst), generated);
    assert_eq!(sidecar.stub.embed_hits.load(Ordering::SeqCst), embedded);
}
