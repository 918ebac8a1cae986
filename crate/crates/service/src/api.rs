use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stsem_core::graph_model::load_corpus;
use stsem_core::learner::SemanticSign;
use stsem_core::semantics::PosteriorRecord;
use stsem_core::session::{Session, SessionConfig, DEFAULT_THRESHOLD};
use stsem_core::MatchConfig;

use crate::error::ApiError;
use crate::state::{AppState, Committed, SessionSlot};

const DEFAULT_TOP_K: usize = 10;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/corpora", post(upload_corpus))
        .route("/corpora/{id}/graphs/{gid}", get(graph_detail))
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}/feedback", post(submit_feedback))
        .route("/sessions/{id}/ranking", get(get_ranking))
        .route("/sessions/{id}/threshold", put(set_threshold))
        .route("/sessions/{id}/export", get(export_session))
        .with_state(state)
}

type ApiResult = Result<Response, ApiError>;

async fn upload_corpus(State(state): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult {
    let body = body?;
    let corpus = load_corpus(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", e.to_string()))?;
    let (id, corpus) = state.add_corpus(corpus);
    let graph_ids: Vec<&str> = corpus.graphs().iter().map(|g| g.id.as_str()).collect();
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "revision": 0,
            "corpus_id": id,
            "feature_dimension": corpus.feature_dimension(),
            "graph_count": corpus.len(),
            "graph_ids": graph_ids,
        })),
    )
        .into_response())
}

async fn graph_detail(State(state): State<Arc<AppState>>, Path((id, gid)): Path<(String, String)>) -> ApiResult {
    let corpus = state.corpus(&id)?;
    let graph = corpus
        .get(&gid)
        .ok_or_else(|| ApiError::not_found("graph_not_found", format!("graph `{gid}` is not in corpus `{id}`")))?;
    Ok(Json(json!({"revision": 0, "corpus_id": id, "graph": graph})).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    corpus_id: String,
    r: Option<usize>,
    beam_width: Option<usize>,
    deletion_penalty: Option<f64>,
    threshold: Option<f64>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    let corpus = state.corpus(&req.corpus_id)?;
    let config = SessionConfig {
        levels: req.r.unwrap_or(state.config.default_levels),
        matcher: MatchConfig {
            beam_width: req.beam_width.unwrap_or(state.config.default_beam_width),
            deletion_penalty: req.deletion_penalty.unwrap_or(MatchConfig::default().deletion_penalty),
        },
        threshold: req.threshold.unwrap_or(DEFAULT_THRESHOLD),
    };
    let session = Session::new(&corpus, config)?;
    let id = uuid::Uuid::new_v4().to_string();
    state.persist(&id, &session)?;
    let body = session_descriptor(&id, &session);
    state.insert_session(id, SessionSlot::new(corpus, Committed { session, ranking: None }));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn session_descriptor(id: &str, s: &Session) -> Value {
    json!({
        "session_id": id,
        "corpus_id": s.corpus_id,
        "revision": s.revision,
        "status": status(s),
        "threshold": s.threshold,
        "r": s.quantizer.levels(),
        "beam_width": s.matcher.beam_width,
        "deletion_penalty": s.matcher.deletion_penalty,
    })
}

fn status(s: &Session) -> &'static str {
    if s.is_trained() {
        "ranked"
    } else {
        "untrained"
    }
}

#[derive(Serialize)]
struct RankingPage<'a> {
    revision: u64,
    status: &'static str,
    threshold: f64,
    total: usize,
    offset: usize,
    labeled_count: usize,
    degenerate: bool,
    positive_reference: Option<&'a str>,
    negative_reference: Option<&'a str>,
    training_examples: Value,
    records: &'a [PosteriorRecord],
}

fn page(committed: &Committed, offset: usize, top_k: usize) -> Value {
    let s = &committed.session;
    let examples = |sign: SemanticSign| -> Vec<&str> {
        s.model(sign).training_log.iter().map(|e| e.graph_id.as_str()).collect()
    };
    let (records, labeled, degenerate): (&[PosteriorRecord], usize, bool) = match &committed.ranking {
        Some(r) => (&r.records, r.labeled_count(), r.degenerate),
        None => (&[], 0, false),
    };
    let start = offset.min(records.len());
    let end = start.saturating_add(top_k).min(records.len());
    serde_json::to_value(RankingPage {
        revision: s.revision,
        status: status(s),
        threshold: s.threshold,
        total: records.len(),
        offset,
        labeled_count: labeled,
        degenerate,
        positive_reference: s.positive.reference_graph_id.as_deref(),
        negative_reference: s.negative.reference_graph_id.as_deref(),
        training_examples: json!({
            "positive": examples(SemanticSign::Positive),
            "negative": examples(SemanticSign::Negative),
        }),
        records: &records[start..end],
    })
    .expect("page serializes")
}

#[derive(Deserialize)]
struct PageQuery {
    top_k: Option<usize>,
    offset: Option<usize>,
}

async fn get_ranking(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<PageQuery>, QueryRejection>,
) -> ApiResult {
    let Query(q) = query?;
    let slot = state.session(&id)?;
    let committed = slot.current();
    Ok(Json(page(&committed, q.offset.unwrap_or(0), q.top_k.unwrap_or(DEFAULT_TOP_K))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Feedback {
    graph_id: String,
    label: SemanticSign,
    revision: u64,
}

async fn submit_feedback(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Feedback>, JsonRejection>,
) -> ApiResult {
    let Json(fb) = body?;
    let slot = state.session(&id)?;
    let _writer = slot.writer.lock().await;
    let current = slot.current();
    if fb.revision != current.session.revision {
        return Err(ApiError::conflict(fb.revision, current.session.revision));
    }
    if !slot.corpus.contains(&fb.graph_id) {
        return Err(ApiError::not_found(
            "graph_not_found",
            format!("graph `{}` is not in the corpus", fb.graph_id),
        ));
    }
    let corpus = slot.corpus.clone();
    let committed = tokio::task::spawn_blocking(move || -> Result<Committed, ApiError> {
        let session = current.session.apply_feedback(&corpus, &fb.graph_id, fb.label)?;
        let ranking = session.rank(&corpus, None)?;
        Ok(Committed { session, ranking })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    state.persist(&id, &committed.session)?;
    let body = page(&committed, 0, DEFAULT_TOP_K);
    slot.publish(committed);
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdUpdate {
    threshold: f64,
    revision: u64,
}

async fn set_threshold(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ThresholdUpdate>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    let slot = state.session(&id)?;
    let _writer = slot.writer.lock().await;
    let current = slot.current();
    if req.revision != current.session.revision {
        return Err(ApiError::conflict(req.revision, current.session.revision));
    }
    let session = current.session.set_threshold(req.threshold)?;
    let mut ranking = current.ranking.clone();
    if let Some(r) = &mut ranking {
        r.relabel(req.threshold).map_err(|e| ApiError::invalid(e.to_string()))?;
    }
    state.persist(&id, &session)?;
    let body = json!({
        "revision": session.revision,
        "threshold": session.threshold,
        "labeled_count": ranking.as_ref().map_or(0, |r| r.labeled_count()),
        "total": ranking.as_ref().map_or(0, |r| r.records.len()),
    });
    slot.publish(Committed { session, ranking });
    Ok(Json(body).into_response())
}

async fn export_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let slot = state.session(&id)?;
    let bytes = slot.current().session.to_snapshot_bytes();
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn import_session(State(state): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult {
    let body = body?;
    let session = Session::from_snapshot_bytes(&body)?;
    let corpus = state.corpus(&session.corpus_id)?;
    session.check_corpus(&corpus)?;
    let rank_corpus = corpus.clone();
    let committed = tokio::task::spawn_blocking(move || -> Result<Committed, ApiError> {
        let ranking = session.rank(&rank_corpus, None)?;
        Ok(Committed { session, ranking })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    let id = uuid::Uuid::new_v4().to_string();
    state.persist(&id, &committed.session)?;
    let body = session_descriptor(&id, &committed.session);
    state.insert_session(id, SessionSlot::new(corpus, committed));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}
