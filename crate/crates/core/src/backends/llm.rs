use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::wire::{read_body, transport_error};
use super::{elapsed_ms, into_hypothesis, Backend, BackendError, TranslationRequest, TranslationResponse, DEFAULT_TIMEOUT};
use crate::template::{to_prompt_string, LexicalTemplate};
use crate::text::Lang;

pub const TOKEN_ENV: &str = "IMT_LLM_TOKEN";
pub const TEMPERATURE: f64 = 0.0;
pub const MAX_TOKENS: u32 = 200;

pub fn initial_prompt(src: &Lang, tgt: &Lang, source: &str) -> String {
    format!(
        "Translate the following {} text to {}:{}",
        src.display_name(),
        tgt.display_name(),
        source
    )
}

pub fn constrained_prompt(src: &Lang, tgt: &Lang, source: &str, tpl: &LexicalTemplate) -> String {
    let (s, t) = (src.display_name(), tgt.display_name());
    format!(
        "Translate the {s} sentence by filling in the {t} template. \
         Strictly follow the given {t} template and generate a whole translation.\n\
         {s} sentence: {source}\n\
         {t} template: {}\n\
         {t} translation:",
        to_prompt_string(tpl)
    )
}

/// Strips surrounding whitespace and one layer of matching quotes.
pub fn clean_completion(raw: &str) -> &str {
    let t = raw.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('„', '“'), ('「', '」')] {
        if t.chars().count() >= 2 && t.starts_with(open) && t.ends_with(close) {
            let inner = &t[open.len_utf8()..t.len() - close.len_utf8()];
            return inner.trim();
        }
    }
    t
}

/// Chat-completions client using a single user message per request.
#[derive(Debug, Clone)]
pub struct LlmBackend {
    endpoint: String,
    model: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl LlmBackend {
    /// Reads the bearer token from `IMT_LLM_TOKEN` when set.
    pub fn new(endpoint: &str, model: &str) -> Self {
        Self::with_options(endpoint, model, std::env::var(TOKEN_ENV).ok(), DEFAULT_TIMEOUT)
    }

    pub fn with_options(
        endpoint: &str,
        model: &str,
        token: Option<String>,
        timeout: Duration,
    ) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            token: token.filter(|t| !t.is_empty()),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn prompt(req: &TranslationRequest) -> String {
        match &req.template {
            None => initial_prompt(&req.src_lang, &req.tgt_lang, req.source.text()),
            Some(tpl) => constrained_prompt(&req.src_lang, &req.tgt_lang, req.source.text(), tpl),
        }
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "temperature": TEMPERATURE,
            "max_tokens": MAX_TOKENS,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

fn completion_text(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
}

impl Backend for LlmBackend {
    fn id(&self) -> &str {
        "llm"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError> {
        req.validate()?;
        let body = self.request_body(&Self::prompt(req)).to_string();
        let start = Instant::now();
        let mut call = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = call.send_string(&body).map_err(transport_error)?;
        let text = read_body(resp)?;
        let latency_ms = elapsed_ms(start);
        let completion = completion_text(&text)?;
        let cleaned = clean_completion(&completion);
        if cleaned.is_empty() {
            return Err(BackendError::Malformed("empty completion".into()));
        }
        Ok(TranslationResponse {
            hypothesis: into_hypothesis(cleaned, &req.tgt_lang)?,
            latency_ms,
            backend_id: self.id().to_string(),
        })
    }
}
