use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{elapsed_ms, into_hypothesis, Backend, BackendError, TranslationRequest, TranslationResponse, DEFAULT_TIMEOUT};
use crate::template::LexicalTemplate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub source: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub template: Option<LexicalTemplate>,
}

impl From<&TranslationRequest> for WireRequest {
    fn from(req: &TranslationRequest) -> Self {
        Self {
            source: req.source.text().to_string(),
            src_lang: req.src_lang.code().to_string(),
            tgt_lang: req.tgt_lang.code().to_string(),
            template: req.template.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub translation: String,
}

/// Client for model servers speaking the `POST /translate` protocol.
#[derive(Debug, Clone)]
pub struct WireBackend {
    url: String,
    agent: ureq::Agent,
}

impl WireBackend {
    /// `endpoint` is the server's base URL; `/translate` is appended unless
    /// already present.
    pub fn new(endpoint: &str) -> Self {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/translate") {
            base.to_string()
        } else {
            format!("{base}/translate")
        };
        Self {
            url,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

pub(crate) fn transport_error(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            BackendError::Transport(format!("HTTP {code}: {}", body.trim()))
        }
        ureq::Error::Transport(t) => {
            let msg = t.to_string();
            if msg.contains("timed out") || msg.contains("Timeout") {
                BackendError::Timeout
            } else {
                BackendError::Transport(msg)
            }
        }
    }
}

pub(crate) fn read_body(resp: ureq::Response) -> Result<String, BackendError> {
    resp.into_string().map_err(|e| {
        if e.kind() == std::io::ErrorKind::TimedOut || e.kind() == std::io::ErrorKind::WouldBlock {
            BackendError::Timeout
        } else {
            BackendError::Transport(e.to_string())
        }
    })
}

impl Backend for WireBackend {
    fn id(&self) -> &str {
        "wire"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError> {
        req.validate()?;
        let body = serde_json::to_string(&WireRequest::from(req)).expect("request serializes");
        let start = Instant::now();
        let resp = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json")
            .send_string(&body)
            .map_err(transport_error)?;
        let text = read_body(resp)?;
        let latency_ms = elapsed_ms(start);
        let parsed: WireResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        Ok(TranslationResponse {
            hypothesis: into_hypothesis(&parsed.translation, &req.tgt_lang)?,
            latency_ms,
            backend_id: self.id().to_string(),
        })
    }
}
