//! Session service for human evaluation.
//!
//! Each live session runs the dialogue engine one turn per request: the
//! client sends the tagged revision of the current hypothesis, the server
//! costs it from the tags, builds the template, queries the backend and
//! checks the reply. Finished sessions are appended to a single log store.

mod error;
mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use imteval_core::alignment::mtpe_cost;
use imteval_core::backends::{Backend, BackendSpec, SpecError, TranslationRequest};
use imteval_core::corpus::ParallelCorpus;
use imteval_core::edit::{EditTag, TaggedText, TaggedTextWire, PLACEHOLDER};
use imteval_core::metrics::{session_metrics, SessionMetrics};
use imteval_core::session::{
    ConfigEcho, FallbackReason, Outcome, SessionLog, TurnRecord, HUMAN_POLICY,
};
use imteval_core::template::{build_template, matches, LexicalTemplate, MatchWitness};
use imteval_core::text::{Lang, Sentence};

pub use error::ApiError;
pub use store::LogStore;

const INDEX_HTML: &str = include_str!("index.html");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub backend: BackendSpec,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
    /// Sentences a client may open by index.
    pub corpus: Option<ParallelCorpus>,
    /// Append-only JSONL file receiving every finished log.
    pub log_path: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(backend: BackendSpec, src_lang: Lang, tgt_lang: Lang) -> Self {
        Self {
            backend,
            src_lang,
            tgt_lang,
            corpus: None,
            log_path: None,
        }
    }
}

struct LiveSession {
    config: ConfigEcho,
    source: Sentence,
    tgt_lang: Lang,
    backend: Arc<dyn Backend>,
    hyp: String,
    turns: Vec<TurnRecord>,
    closed: Option<SessionLog>,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<LiveSession>>>>,
    store: Mutex<LogStore>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let store = match &config.log_path {
            Some(p) => LogStore::with_file(p)?,
            None => LogStore::in_memory(),
        };
        Ok(Self(Arc::new(Inner {
            config,
            sessions: Mutex::new(HashMap::new()),
            store: Mutex::new(store),
        })))
    }

    pub fn finished_logs(&self) -> Vec<SessionLog> {
        self.0.store.lock().expect("store lock").logs().to_vec()
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<LiveSession>>, ApiError> {
        self.0
            .sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/turns", post(post_turn))
        .route("/api/sessions/{id}/submit", post(submit))
        .route("/api/sessions/{id}/log", get(get_log))
        .route("/api/export", get(export))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub src_lang: Option<String>,
    #[serde(default)]
    pub tgt_lang: Option<String>,
    #[serde(default)]
    pub reference: Option<String>,
    /// First hypothesis for backends that take a fixed one.
    #[serde(default)]
    pub initial: Option<String>,
    /// Opens corpus pair `index` instead of an explicit source.
    #[serde(default)]
    pub index: Option<usize>,
    /// Backend spec overriding the service default.
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub hypothesis: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReply {
    pub turn: usize,
    pub hypothesis: String,
    pub violation: bool,
    pub latency_ms: f64,
    /// Keystroke cost charged for the submitted tags.
    pub cost: u64,
    pub template: LexicalTemplate,
    /// Where each template segment landed; absent on violation.
    pub witness: Option<MatchWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submit {
    pub final_text: String,
    #[serde(default)]
    pub mtpe_clicked: bool,
}

fn sentence(text: &str, lang: &Lang, what: &str) -> Result<Sentence, ApiError> {
    Sentence::new(text.trim(), lang.clone())
        .map_err(|e| ApiError::bad_request("invalid_text", format!("{what}: {e}")))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<SessionCreated>, ApiError> {
    let Json(body) = body?;
    let cfg = &state.0.config;
    let src_lang = body.src_lang.as_deref().map(Lang::new).unwrap_or_else(|| cfg.src_lang.clone());
    let tgt_lang = body.tgt_lang.as_deref().map(Lang::new).unwrap_or_else(|| cfg.tgt_lang.clone());
    let (source, reference, initial) = match body.index {
        Some(i) => {
            let pair = cfg
                .corpus
                .as_ref()
                .and_then(|c| c.pairs.get(i))
                .ok_or_else(|| ApiError::bad_request("invalid_index", format!("no corpus entry {i}")))?;
            (pair.source.clone(), pair.reference.clone(), pair.initial.clone())
        }
        None => {
            let src = body
                .source
                .as_deref()
                .ok_or_else(|| ApiError::bad_request("missing_source", "either source or index is required"))?;
            let source = sentence(src, &src_lang, "source")?;
            if source.text().is_empty() {
                return Err(ApiError::bad_request("invalid_text", "source is empty"));
            }
            let reference = body.reference.as_deref().map(|r| sentence(r, &tgt_lang, "reference")).transpose()?;
            let initial = body.initial.as_deref().map(|h| sentence(h, &tgt_lang, "initial")).transpose()?;
            (source, reference, initial)
        }
    };
    let spec = match &body.backend {
        Some(s) => s
            .parse::<BackendSpec>()
            .map_err(|e| ApiError::bad_request("invalid_backend", e.to_string()))?,
        None => cfg.backend.clone(),
    };
    let id = uuid::Uuid::new_v4();
    let seed = body.seed.unwrap_or(id.as_u64_pair().0);
    let backend = spec
        .instantiate(reference.as_ref(), initial.as_ref(), seed)
        .map_err(|e| match e {
            SpecError::MissingReference(_) => ApiError::bad_request("missing_reference", e.to_string()),
            _ => ApiError::bad_request("invalid_backend", e.to_string()),
        })?;

    let req = TranslationRequest::initial(source.clone(), tgt_lang.clone());
    let b = backend.clone();
    let resp = tokio::task::spawn_blocking(move || b.translate(&req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::backend(e.to_string()))?;
    let hyp = resp.hypothesis.into_text();

    let config = ConfigEcho {
        source: source.text().to_string(),
        src_lang: source.lang().code().to_string(),
        reference: reference.as_ref().map(|r| r.text().to_string()),
        tgt_lang: tgt_lang.code().to_string(),
        policy: HUMAN_POLICY.to_string(),
        backend: spec.to_string(),
        seed,
        turn_limit_override: None,
        turn_limit: None,
    };
    let live = LiveSession {
        config,
        source,
        tgt_lang,
        backend,
        hyp: hyp.clone(),
        turns: vec![TurnRecord {
            i: 0,
            template: None,
            tagged: None,
            hyp: hyp.clone(),
            cost: 0,
            violation: false,
            latency_ms: Some(resp.latency_ms),
        }],
        closed: None,
    };
    let id = id.simple().to_string();
    state
        .0
        .sessions
        .lock()
        .expect("session table lock")
        .insert(id.clone(), Arc::new(tokio::sync::Mutex::new(live)));
    Ok(Json(SessionCreated {
        id,
        hypothesis: hyp,
        latency_ms: resp.latency_ms,
    }))
}

/// Whether `tagged` is a revision of `hyp`: kept, deleted and blanked
/// characters come from `hyp` in order, every replaced run stands for a
/// non-empty stretch of it, and nothing of `hyp` is left unaccounted for.
pub fn is_revision_of(tagged: &TaggedText, hyp: &str) -> bool {
    let h: Vec<char> = hyp.chars().collect();
    let (chars, tags) = (tagged.chars(), tagged.tags());
    let n = h.len();
    // reach[j]: hyp[..j] consumed by the tagged prefix processed so far.
    let mut reach = vec![false; n + 1];
    reach[0] = true;
    for p in 0..chars.len() {
        let mut next = vec![false; n + 1];
        let run_start = p == 0 || tags[p - 1] != tags[p];
        for j in (0..=n).filter(|&j| reach[j]) {
            let (c, t) = (chars[p], tags[p]);
            match t {
                EditTag::Keep | EditTag::Delete | EditTag::Blank => {
                    if j < n && h[j] == c {
                        next[j + 1] = true;
                    }
                    if t == EditTag::Blank && c == PLACEHOLDER {
                        next[j] = true;
                    }
                }
                EditTag::Insert => next[j] = true,
                EditTag::Replace if run_start => next[j + 1..].iter_mut().for_each(|r| *r = true),
                EditTag::Replace => next[j] = true,
            }
        }
        reach = next;
    }
    reach[n]
}

async fn post_turn(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<TaggedTextWire>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<TurnReply>, ApiError> {
    let Json(wire) = body?;
    let session = state.session(&id)?;
    let mut live = session
        .try_lock()
        .map_err(|_| ApiError::conflict("turn_in_flight", "a request for this session is in flight"))?;
    if live.closed.is_some() {
        return Err(ApiError::conflict("session_closed", "session already submitted"));
    }
    let tagged = TaggedText::try_from(wire).map_err(|e| ApiError::bad_request("malformed_tags", e.to_string()))?;
    if !is_revision_of(&tagged, &live.hyp) {
        return Err(ApiError::bad_request(
            "tags_mismatch",
            "tagged text is not a revision of the current hypothesis",
        ));
    }
    let template = build_template(&tagged).map_err(|e| ApiError::bad_request("malformed_tags", e.to_string()))?;
    let cost = tagged.cost();
    let turn = live.turns.len();
    let req = TranslationRequest::constrained(live.source.clone(), live.tgt_lang.clone(), template.clone(), turn);
    let backend = live.backend.clone();
    let resp = tokio::task::spawn_blocking(move || backend.translate(&req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::backend(e.to_string()))?;
    let hyp = resp.hypothesis.into_text();
    let m = matches(&template, &hyp);
    live.turns.push(TurnRecord {
        i: turn,
        template: Some(template.clone()),
        tagged: Some(tagged),
        hyp: hyp.clone(),
        cost,
        violation: !m.satisfied,
        latency_ms: Some(resp.latency_ms),
    });
    live.hyp = hyp.clone();
    Ok(Json(TurnReply {
        turn,
        hypothesis: hyp,
        violation: !m.satisfied,
        latency_ms: resp.latency_ms,
        cost,
        template,
        witness: m.witness,
    }))
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Submit>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<SessionMetrics>, ApiError> {
    let Json(body) = body?;
    let session = state.session(&id)?;
    let mut live = session
        .try_lock()
        .map_err(|_| ApiError::conflict("turn_in_flight", "a request for this session is in flight"))?;
    if live.closed.is_some() {
        return Err(ApiError::conflict("session_closed", "session already submitted"));
    }
    let final_text = body.final_text.trim();
    let outcome = if body.mtpe_clicked {
        Outcome::fallback(FallbackReason::MtpeCheckbox, mtpe_cost(&live.hyp, final_text).cost)
    } else if final_text == live.hyp {
        Outcome::success()
    } else {
        Outcome::fallback(FallbackReason::ManualEdit, mtpe_cost(&live.hyp, final_text).cost)
    };
    let log = SessionLog::new(live.config.clone(), live.turns.clone(), outcome);
    let metrics = session_metrics(&log).map_err(|e| ApiError::internal(e.to_string()))?;
    state
        .0
        .store
        .lock()
        .expect("store lock")
        .append(log.clone())
        .map_err(|e| ApiError::internal(format!("could not persist log: {e}")))?;
    live.closed = Some(log);
    Ok(Json(metrics))
}

fn jsonl(logs: &[SessionLog]) -> Response {
    let mut body = String::new();
    for log in logs {
        body.push_str(&log.to_json_line());
        body.push('\n');
    }
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn get_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let live = session
        .try_lock()
        .map_err(|_| ApiError::conflict("turn_in_flight", "a request for this session is in flight"))?;
    match &live.closed {
        Some(log) => Ok(jsonl(std::slice::from_ref(log))),
        None => Err(ApiError::conflict("session_open", "the log is written on submit")),
    }
}

async fn export(State(state): State<AppState>) -> Response {
    jsonl(&state.finished_logs())
}
