use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use stsem_core::graph_model::save_corpus;
use stsem_core::synth::{generate_corpus, two_class_specs};
use stsem_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

struct Client {
    app: Router,
}

impl Client {
    fn new(config: ServiceConfig) -> (Self, Arc<AppState>) {
        let state = Arc::new(AppState::new(config));
        (Self { app: router(state.clone()) }, state)
    }

    async fn raw(&self, method: Method, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(Body::from(body))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let bytes = body.map(|b| serde_json::to_vec(&b).unwrap()).unwrap_or_default();
        let (status, out) = self.raw(method, uri, bytes).await;
        (status, serde_json::from_slice(&out).unwrap_or(Value::Null))
    }

    async fn upload_planted(&self) -> (String, Vec<String>, Vec<String>) {
        let (corpus, truth) = generate_corpus(&two_class_specs(5, 0.1, 0.5, 2, 2), 2, 21).unwrap();
        let (status, body) = self.raw(Method::POST, "/corpora", save_corpus(&corpus)).await;
        assert_eq!(status, StatusCode::CREATED);
        let body: Value = serde_json::from_slice(&body).unwrap();
        let ids = |label: &str| truth.iter().filter(|(_, l)| *l == label).map(|(g, _)| g.clone()).collect();
        (body["corpus_id"].as_str().unwrap().to_string(), ids("positive"), ids("negative"))
    }

    async fn session(&self, corpus_id: &str) -> String {
        let (status, body) = self
            .call(Method::POST, "/sessions", Some(json!({"corpus_id": corpus_id, "r": 50})))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        assert_eq!(body["revision"], 0);
        body["session_id"].as_str().unwrap().to_string()
    }

    async fn feedback(&self, sid: &str, gid: &str, label: &str, revision: u64) -> (StatusCode, Value) {
        self.call(
            Method::POST,
            &format!("/sessions/{sid}/feedback"),
            Some(json!({"graph_id": gid, "label": label, "revision": revision})),
        )
        .await
    }

    async fn ranking(&self, sid: &str, query: &str) -> Value {
        let (status, body) = self.call(Method::GET, &format!("/sessions/{sid}/ranking{query}"), None).await;
        assert_eq!(status, StatusCode::OK);
        body
    }
}

#[tokio::test]
async fn sessions_require_a_known_corpus() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (status, body) = c.call(Method::POST, "/sessions", Some(json!({"corpus_id": "missing"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "corpus_not_found");
    assert!(body["message"].is_string());

    let (corpus, _, _) = c.upload_planted().await;
    let a = c.session(&corpus).await;
    let b = c.session(&corpus).await;
    assert_ne!(a, b);
}

#[tokio::test]
async fn invalid_corpus_upload_is_rejected() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (status, body) = c.call(Method::POST, "/corpora", Some(json!({"nope": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_corpus");
}

#[tokio::test]
async fn graph_detail_is_served() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, _) = c.upload_planted().await;
    let (status, body) = c.call(Method::GET, &format!("/corpora/{corpus}/graphs/{}", pos[0]), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["graph"]["id"], pos[0].as_str());
    assert_eq!(body["revision"], 0);
    let (status, _) = c.call(Method::GET, &format!("/corpora/{corpus}/graphs/zzz"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn feedback_loop_and_ranking() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, neg) = c.upload_planted().await;
    let sid = c.session(&corpus).await;

    let fresh = c.ranking(&sid, "").await;
    assert_eq!(fresh["status"], "untrained");
    assert_eq!(fresh["records"].as_array().unwrap().len(), 0);
    assert_eq!(fresh["revision"], 0);

    let (status, body) = c.feedback(&sid, &pos[0], "positive", 0).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 1);
    assert_eq!(body["positive_reference"], pos[0].as_str());
    assert!(body["negative_reference"].is_null());
    let top = &body["records"][0];
    assert_eq!(top["graph_id"], pos[0].as_str());
    assert_eq!(top["likelihood_pos"], 1.0);

    let mut revision = 1;
    for (g, label) in [(&neg[0], "negative"), (&pos[1], "positive"), (&neg[1], "negative")] {
        let (status, body) = c.feedback(&sid, g, label, revision).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        revision += 1;
        assert_eq!(body["revision"], revision);
    }

    let page = c.ranking(&sid, "?top_k=3").await;
    let records = page["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(page["total"], 10);
    for w in records.windows(2) {
        assert!(w[0]["posterior"].as_f64() >= w[1]["posterior"].as_f64());
    }
    assert_eq!(page, c.ranking(&sid, "?top_k=3").await);
    let next = c.ranking(&sid, "?top_k=3&offset=3").await;
    let full = c.ranking(&sid, "?top_k=100").await;
    assert_eq!(next["records"].as_array().unwrap()[..], full["records"].as_array().unwrap()[3..6]);
    assert_eq!(full["training_examples"]["positive"], json!([pos[0], pos[1]]));

    let top5: Vec<&str> = full["records"].as_array().unwrap()[..5]
        .iter()
        .map(|r| r["graph_id"].as_str().unwrap())
        .collect();
    assert!(top5.iter().all(|g| pos.iter().any(|p| p == g)), "{top5:?}");
}

#[tokio::test]
async fn stale_revision_conflicts_without_changing_state() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, _) = c.upload_planted().await;
    let sid = c.session(&corpus).await;
    assert_eq!(c.feedback(&sid, &pos[0], "positive", 0).await.0, StatusCode::OK);
    let before = c.ranking(&sid, "?top_k=100").await;
    let (status, body) = c.feedback(&sid, &pos[1], "positive", 0).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "conflict");
    assert_eq!(body["revision"], 1);
    assert_eq!(c.ranking(&sid, "?top_k=100").await, before);
}

#[tokio::test]
async fn concurrent_mutations_are_linearized() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, neg) = c.upload_planted().await;
    let sid = c.session(&corpus).await;
    let (a, b) = tokio::join!(c.feedback(&sid, &pos[0], "positive", 0), c.feedback(&sid, &neg[0], "negative", 0));
    let mut statuses = [a.0, b.0];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
    assert_eq!(c.ranking(&sid, "").await["revision"], 1);
}

#[tokio::test]
async fn unknown_ids_and_bad_bodies() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, _, _) = c.upload_planted().await;
    let sid = c.session(&corpus).await;
    let (status, body) = c.feedback(&sid, "g9999", "positive", 0).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "graph_not_found");
    let (status, body) = c.feedback("nope", "g0000", "positive", 0).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "session_not_found");
    let (status, body) = c.feedback(&sid, "g0000", "maybe", 0).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid_request");
    assert_eq!(c.ranking(&sid, "").await["revision"], 0);
}

#[tokio::test]
async fn threshold_relabels() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, neg) = c.upload_planted().await;
    let sid = c.session(&corpus).await;
    c.feedback(&sid, &pos[0], "positive", 0).await;
    c.feedback(&sid, &neg[0], "negative", 1).await;
    let uri = format!("/sessions/{sid}/threshold");

    let (status, body) = c.call(Method::PUT, &uri, Some(json!({"threshold": 0.0, "revision": 2}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["revision"], 3);
    assert_eq!(body["labeled_count"], 10);

    let mut last = 10;
    for (k, t) in [0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        let (status, body) = c.call(Method::PUT, &uri, Some(json!({"threshold": t, "revision": 3 + k}))).await;
        assert_eq!(status, StatusCode::OK);
        let n = body["labeled_count"].as_u64().unwrap();
        assert!(n <= last);
        last = n;
    }
    let full = c.ranking(&sid, "?top_k=100").await;
    let ones = full["records"].as_array().unwrap().iter().filter(|r| r["posterior"] == 1.0).count() as u64;
    assert_eq!(last, ones);
    for r in full["records"].as_array().unwrap() {
        assert_eq!(r["labeled"], r["posterior"] == 1.0);
    }

    let (status, body) = c.call(Method::PUT, &uri, Some(json!({"threshold": 1.5, "revision": 7}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert_eq!(c.ranking(&sid, "").await["revision"], 7);
}

#[tokio::test]
async fn export_import_round_trip() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, neg) = c.upload_planted().await;
    let sid = c.session(&corpus).await;
    c.feedback(&sid, &pos[0], "positive", 0).await;
    c.feedback(&sid, &neg[0], "negative", 1).await;

    let (status, exported) = c.raw(Method::GET, &format!("/sessions/{sid}/export"), vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(c.raw(Method::GET, &format!("/sessions/{sid}/export"), vec![]).await.1, exported);

    let (status, body) = c.raw(Method::POST, "/sessions/import", exported.clone()).await;
    assert_eq!(status, StatusCode::CREATED);
    let body: Value = serde_json::from_slice(&body).unwrap();
    let imported = body["session_id"].as_str().unwrap();
    assert_eq!(body["revision"], 2);
    let mut a = c.ranking(&sid, "?top_k=100").await;
    let mut b = c.ranking(imported, "?top_k=100").await;
    a.as_object_mut().unwrap().remove("session_id");
    b.as_object_mut().unwrap().remove("session_id");
    assert_eq!(a, b);

    let (status, body) = c.raw(Method::POST, "/sessions/import", exported[..exported.len() / 2].to_vec()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["error"], "invalid_snapshot");
}

#[tokio::test]
async fn sessions_are_isolated() {
    let (c, _) = Client::new(ServiceConfig::default());
    let (corpus, pos, neg) = c.upload_planted().await;
    let a = c.session(&corpus).await;
    let b = c.session(&corpus).await;
    c.feedback(&a, &pos[0], "positive", 0).await;
    let before = c.ranking(&a, "?top_k=100").await;
    c.feedback(&b, &neg[0], "positive", 0).await;
    c.feedback(&b, &pos[1], "negative", 1).await;
    assert_eq!(c.ranking(&a, "?top_k=100").await, before);
}

#[tokio::test]
async fn sessions_persist_and_restore() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        session_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let (c, state) = Client::new(config.clone());
    let (corpus_id, pos, _) = c.upload_planted().await;
    let sid = c.session(&corpus_id).await;
    c.feedback(&sid, &pos[0], "positive", 0).await;
    let before = c.ranking(&sid, "?top_k=100").await;
    let on_disk = std::fs::read(dir.path().join(format!("{sid}.json"))).unwrap();
    let (_, exported) = c.raw(Method::GET, &format!("/sessions/{sid}/export"), vec![]).await;
    assert_eq!(on_disk, exported);

    let (c2, state2) = Client::new(config);
    state2.add_corpus((*state.corpus(&corpus_id).unwrap()).clone());
    let (restored, skipped) = state2.restore_sessions(dir.path()).unwrap();
    assert_eq!(restored, vec![sid.clone()]);
    assert!(skipped.is_empty());
    assert_eq!(c2.ranking(&sid, "?top_k=100").await, before);
}
