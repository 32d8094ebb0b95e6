//! Translation backends.
//!
//! Every backend answers unconstrained requests (turn 0) and template
//! requests. Backends are never trusted to honour a template: the dialogue
//! engine checks every hypothesis against the template it sent.

mod builtin;
mod llm;
mod spec;
mod wire;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::LexicalTemplate;
use crate::text::{Lang, Sentence};

pub use builtin::{
    corrupt_words, ConfusionVocabulary, NoisyOracleBackend, OracleBackend, PrefixOracleBackend,
    DEFAULT_CONFUSION,
};
pub use llm::{clean_completion, constrained_prompt, initial_prompt, LlmBackend, TOKEN_ENV};
pub use spec::{BackendSpec, SpecError, DEFAULT_LLM_MODEL, MODEL_ENV};
pub use wire::{WireBackend, WireRequest, WireResponse};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("no entry for source sentence {0:?}")]
    UnknownSource(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationRequest {
    pub source: Sentence,
    pub template: Option<LexicalTemplate>,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
    pub turn_index: usize,
}

impl TranslationRequest {
    pub fn initial(source: Sentence, tgt_lang: Lang) -> Self {
        let src_lang = source.lang().clone();
        Self {
            source,
            template: None,
            src_lang,
            tgt_lang,
            turn_index: 0,
        }
    }

    pub fn constrained(
        source: Sentence,
        tgt_lang: Lang,
        template: LexicalTemplate,
        turn_index: usize,
    ) -> Self {
        let src_lang = source.lang().clone();
        Self {
            source,
            template: Some(template),
            src_lang,
            tgt_lang,
            turn_index,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if (self.turn_index == 0) != self.template.is_none() {
            return Err(BackendError::InvalidRequest(
                "a template is required on every turn but the first".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationResponse {
    pub hypothesis: Sentence,
    pub latency_ms: f64,
    pub backend_id: String,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError> {
        (**self).translate(req)
    }
}

/// Turns raw backend output into a hypothesis sentence: surrounding
/// whitespace is dropped, anything else must already be a valid sentence.
pub(crate) fn into_hypothesis(text: &str, lang: &Lang) -> Result<Sentence, BackendError> {
    Sentence::new(text.trim(), lang.clone()).map_err(|e| BackendError::Malformed(e.to_string()))
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}
