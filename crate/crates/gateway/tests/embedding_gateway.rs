mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::ScriptedTransport;
use serde_json::json;
use twinsim_gateway::transport::HttpResponse;
use twinsim_gateway::{
    BackendMode, EmbeddingCache, EmbeddingGateway, EmbeddingProvider, Endpoint, FixtureEmbeddingProvider, GatewayError,
    HttpEmbeddingProvider,
};

struct Counting<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: EmbeddingProvider> EmbeddingProvider for Counting<P> {
    fn embed_text(&self, model_id: &str, text: &str) -> Result<Vec<f64>, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.embed_text(model_id, text)
    }
}

fn fixture_file(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("fixture.jsonl");
    std::fs::write(
        &path,
        "{\"text\":\"a\",\"values\":[1,0]}\n{\"text\":\"b\",\"values\":[0,1]}\n\n{\"text\":\"c\",\"embedding\":[0.5,0.5],\"model_id\":\"m\"}\n",
    )
    .unwrap();
    path
}

#[test]
fn fixture_table_from_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let f = FixtureEmbeddingProvider::from_jsonl(fixture_file(dir.path())).unwrap();
    assert_eq!(f.embed_text("m", "a").unwrap(), vec![1.0, 0.0]);
    assert_eq!(f.embed_text("m", "b").unwrap(), vec![0.0, 1.0]);
    assert_eq!(f.embed_text("m", "c").unwrap(), vec![0.5, 0.5]);
    assert!(f.embed_text("other", "c").is_err());
}

#[test]
fn batch_dedups_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(Counting {
        inner: FixtureEmbeddingProvider::from_jsonl(fixture_file(dir.path())).unwrap(),
        calls: AtomicUsize::new(0),
    });
    let gw = EmbeddingGateway::new(BackendMode::Live, provider.clone(), Arc::new(EmbeddingCache::in_memory()));
    let texts: Vec<String> = ["a", "b", "a", "a", "b", "c", "a"].iter().map(|s| s.to_string()).collect();
    let serial = gw.embed_batch(&texts, "m", 1);
    let parallel = gw.embed_batch(&texts, "m", 8);
    assert_eq!(serial, parallel);
    assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
    let firsts: Vec<f64> = parallel.iter().map(|v| v.as_ref().unwrap().values()[0]).collect();
    assert_eq!(firsts, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.5, 1.0]);
    assert!(gw.embed_batch(&[], "m", 4).is_empty());
}

#[test]
fn cached_vectors_survive_reopen_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("embeddings.jsonl");
    let mut f = FixtureEmbeddingProvider::default();
    f.insert(None, "x", vec![0.1, 1.0 / 3.0, -2.0e-17, 7.25]);
    let first = {
        let gw =
            EmbeddingGateway::new(BackendMode::Live, Arc::new(f), Arc::new(EmbeddingCache::open(&cache_path).unwrap()));
        gw.embed("x", "m").unwrap()
    };
    let replay = EmbeddingGateway::new(
        BackendMode::Replay,
        Arc::new(FixtureEmbeddingProvider::default()),
        Arc::new(EmbeddingCache::open(&cache_path).unwrap()),
    );
    let again = replay.embed("x", "m").unwrap();
    let bits = |v: &twinsim_core::metrics::EmbeddingVector| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&first), bits(&again));
    assert_eq!(replay.provider_calls(), 0);
}

#[test]
fn http_embeddings_wire_format() {
    let reply = HttpResponse {
        status: 200,
        body: json!({"data": [{"index": 0, "embedding": [0.25, -0.5, 1.0]}]}).to_string(),
        retry_after: None,
    };
    let transport = Arc::new(ScriptedTransport::new(vec![Ok(reply)]));
    let ep = Endpoint {
        base_url: "http://e.test/".into(),
        path: "/v1/embeddings".into(),
        api_key_env: None,
        timeout_secs: 5,
    };
    let provider = HttpEmbeddingProvider::new(ep, transport.clone());
    let gw = EmbeddingGateway::new(BackendMode::Live, Arc::new(provider), Arc::new(EmbeddingCache::in_memory()));
    let v = gw.embed("hello", "all-mpnet-base-v2").unwrap();
    assert_eq!(v.values(), &[0.25, -0.5, 1.0]);
    assert_eq!(v.model_id(), "all-mpnet-base-v2");
    let body = transport.bodies.lock().unwrap()[0].clone();
    assert_eq!(body, json!({"model": "all-mpnet-base-v2", "input": ["hello"]}));
}
