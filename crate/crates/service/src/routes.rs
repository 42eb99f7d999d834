use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use corefqa::curation::{
    bias_preview, highlights, rank_passages, score_passage, validate_pair, BiasPreview, CurationError, DraftPair,
    Highlight, PassageScore, ValidationReport,
};
use corefqa::dataset::write_squad_json;
use corefqa::probes::{split_sentences, Sentence};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::state::{export_pairs, AppState};
use crate::store::{PairRecord, Status, StoreError};

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/passages", get(list_passages))
        .route("/passages/{id}", get(passage))
        .route("/validate", post(validate))
        .route("/pairs", get(list_pairs).post(create_pair))
        .route("/export", get(export))
        .with_state(state)
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Rejected(ValidationReport),
    /// Stored data no longer agrees with the corpus.
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": m})),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": m})),
            ApiError::Rejected(report) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "validation_failed", "message": "the pair breaks the guideline", "report": report}),
            ),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({"error": "conflict", "message": m})),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    json!({"error": "internal", "message": m}),
                )
            }
        };
        (status, Json(body)).into_response()
    }
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        match e {
            CurationError::SpanOutOfRange { .. } | CurationError::EmptyQuestion => ApiError::BadRequest(e.to_string()),
            CurationError::Probe(p) => ApiError::Internal(p.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    sort: Option<String>,
}

async fn list_passages(
    State(s): State<Shared>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<PassageScore>>, ApiError> {
    let mut scores = rank_passages(s.corpus.passages(), &s.lexicon, s.rank_order);
    match q.sort.as_deref() {
        None | Some("score") => {}
        Some("id") => scores.sort_by(|a, b| a.passage_id.cmp(&b.passage_id)),
        Some(other) => return Err(ApiError::BadRequest(format!("unknown sort {other:?}; use score or id"))),
    }
    Ok(Json(scores))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PassageView {
    pub id: String,
    pub text: String,
    pub score: PassageScore,
    pub sentences: Vec<Sentence>,
    pub highlights: Vec<Highlight>,
}

async fn passage(State(s): State<Shared>, Path(id): Path<String>) -> Result<Json<PassageView>, ApiError> {
    let p = s
        .corpus
        .get(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no passage {id:?}")))?;
    Ok(Json(PassageView {
        id: p.id.clone(),
        text: p.text.clone(),
        score: score_passage(p, &s.lexicon, s.rank_order),
        sentences: split_sentences(&p.text),
        highlights: highlights(p, &s.lexicon),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub report: ValidationReport,
    pub bias_preview: Option<BiasPreview>,
    /// Why no preview could be computed, e.g. an empty question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview_error: Option<String>,
}

fn check(s: &AppState, draft: &DraftPair, skip_id: Option<&str>) -> Result<ValidationReport, ApiError> {
    let p = s
        .corpus
        .get(&draft.passage_id)
        .ok_or_else(|| ApiError::NotFound(format!("no passage {:?}", draft.passage_id)))?;
    let existing: Vec<DraftPair> = s
        .store
        .accepted()
        .iter()
        .filter(|r| Some(r.id.as_str()) != skip_id)
        .map(PairRecord::draft)
        .collect();
    Ok(validate_pair(draft, &p.text, &existing, &s.lexicon)?)
}

async fn validate(State(s): State<Shared>, Json(draft): Json<DraftPair>) -> Result<Json<ValidateResponse>, ApiError> {
    blocking(move || {
        let report = check(&s, &draft, None)?;
        let text = &s.corpus.get(&draft.passage_id).expect("checked above").text;
        let (bias_preview, preview_error) = match bias_preview(&draft, text, s.scorer.as_ref()) {
            Ok(p) => (Some(p), None),
            Err(CurationError::Probe(e)) => return Err(ApiError::Internal(e.to_string())),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Json(ValidateResponse {
            report,
            bias_preview,
            preview_error,
        }))
    })
    .await
}

/// A draft to store. Without `id` a new record is created; with `id` the
/// record's latest state is replaced.
#[derive(Debug, Serialize, Deserialize)]
pub struct PairRequest {
    #[serde(flatten)]
    pub draft: DraftPair,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub status: Option<Status>,
}

async fn create_pair(State(s): State<Shared>, Json(req): Json<PairRequest>) -> Result<Response, ApiError> {
    blocking(move || {
        let status = req.status.unwrap_or(Status::Accepted);
        let _writer = s.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let previous = match &req.id {
            Some(id) => Some(
                s.store
                    .get(id)
                    .ok_or_else(|| ApiError::NotFound(format!("no pair {id:?}")))?,
            ),
            None => None,
        };
        let report = check(&s, &req.draft, req.id.as_deref())?;
        if status == Status::Accepted && !report.passed {
            return Err(ApiError::Rejected(report));
        }
        let record = match previous {
            None => s.store.insert(req.draft, status, report)?,
            Some(prev) => s.store.append(PairRecord {
                id: prev.id,
                passage_id: req.draft.passage_id,
                question: req.draft.question,
                answer: req.draft.answer,
                m1: req.draft.m1,
                m2: req.draft.m2,
                status,
                created_at: prev.created_at,
                validation: report,
            })?,
        };
        Ok((StatusCode::CREATED, Json(record)).into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
struct PairsQuery {
    status: Option<Status>,
}

async fn list_pairs(State(s): State<Shared>, Query(q): Query<PairsQuery>) -> Json<Vec<PairRecord>> {
    let records = s.store.records();
    Json(match q.status {
        Some(st) => records.into_iter().filter(|r| r.status == st).collect(),
        None => records,
    })
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(State(s): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    if let Some(f) = q.format.as_deref().filter(|f| *f != "squad") {
        return Err(ApiError::BadRequest(format!(
            "unknown export format {f:?}; only squad is supported"
        )));
    }
    let ds = export_pairs(&s.store.records(), &s.corpus, &s.lexicon).map_err(|e| ApiError::Conflict(e.to_string()))?;
    Ok(([("content-type", "application/json")], write_squad_json(&ds)).into_response())
}
