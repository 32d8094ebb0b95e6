use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use super::{
    corrupt_words, Backend, LlmBackend, NoisyOracleBackend, OracleBackend, PrefixOracleBackend,
    WireBackend,
};
use crate::seed;
use crate::text::Sentence;

pub const DEFAULT_LLM_MODEL: &str = "gpt-3.5-turbo";
pub const MODEL_ENV: &str = "IMT_LLM_MODEL";
pub const DEFAULT_PREFIX_ERROR_RATE: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("unknown backend {0:?}")]
    Unknown(String),
    #[error("bad backend parameter {0:?}")]
    Parameter(String),
    #[error("backend {0} needs a URL")]
    MissingUrl(&'static str),
    #[error("backend {0} needs a reference translation")]
    MissingReference(&'static str),
}

/// A backend description as given on the command line or in a service
/// request: `oracle`, `prefix[:we=R]`, `noisy:we=R,vr=R`, `wire:URL`,
/// `llm:URL`.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Oracle,
    /// `we` is the word error rate used to derive initial hypotheses when
    /// none are supplied.
    Prefix { we: f64 },
    Noisy { we: f64, vr: f64 },
    Wire { url: String },
    Llm { url: String, model: String },
}

fn parse_rates(params: &str) -> Result<Vec<(&str, f64)>, SpecError> {
    params
        .split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| SpecError::Parameter(p.to_string()))?;
            let v: f64 = v.parse().map_err(|_| SpecError::Parameter(p.to_string()))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(SpecError::Parameter(p.to_string()));
            }
            Ok((k.trim(), v))
        })
        .collect()
}

impl FromStr for BackendSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        match name {
            "oracle" if rest.is_none() => Ok(BackendSpec::Oracle),
            "prefix" => {
                let mut we = DEFAULT_PREFIX_ERROR_RATE;
                for (k, v) in parse_rates(rest.unwrap_or(""))? {
                    match k {
                        "we" => we = v,
                        _ => return Err(SpecError::Parameter(k.to_string())),
                    }
                }
                Ok(BackendSpec::Prefix { we })
            }
            "noisy" => {
                let (mut we, mut vr) = (0.0, 0.0);
                for (k, v) in parse_rates(rest.unwrap_or(""))? {
                    match k {
                        "we" => we = v,
                        "vr" => vr = v,
                        _ => return Err(SpecError::Parameter(k.to_string())),
                    }
                }
                Ok(BackendSpec::Noisy { we, vr })
            }
            "wire" => match rest {
                Some(url) if !url.is_empty() => Ok(BackendSpec::Wire {
                    url: url.to_string(),
                }),
                _ => Err(SpecError::MissingUrl("wire")),
            },
            "llm" => match rest {
                Some(url) if !url.is_empty() => Ok(BackendSpec::Llm {
                    url: url.to_string(),
                    model: std::env::var(MODEL_ENV)
                        .ok()
                        .filter(|m| !m.is_empty())
                        .unwrap_or_else(|| DEFAULT_LLM_MODEL.to_string()),
                }),
                _ => Err(SpecError::MissingUrl("llm")),
            },
            _ => Err(SpecError::Unknown(s.to_string())),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Oracle => write!(f, "oracle"),
            BackendSpec::Prefix { .. } => write!(f, "prefix"),
            BackendSpec::Noisy { we, vr } => write!(f, "noisy:we={we},vr={vr}"),
            BackendSpec::Wire { url } => write!(f, "wire:{url}"),
            BackendSpec::Llm { url, .. } => write!(f, "llm:{url}"),
        }
    }
}

impl BackendSpec {
    pub fn needs_reference(&self) -> bool {
        matches!(
            self,
            BackendSpec::Oracle | BackendSpec::Prefix { .. } | BackendSpec::Noisy { .. }
        )
    }

    /// Builds the backend serving one session.
    ///
    /// Built-in backends answer from `reference`; `initial`, when given,
    /// replaces the hypothesis they would produce for the unconstrained
    /// turn.
    pub fn instantiate(
        &self,
        reference: Option<&Sentence>,
        initial: Option<&Sentence>,
        session_seed: u64,
    ) -> Result<Arc<dyn Backend>, SpecError> {
        let need_ref = |name| reference.cloned().ok_or(SpecError::MissingReference(name));
        Ok(match self {
            BackendSpec::Oracle => Arc::new(OracleBackend::new(need_ref("oracle")?)),
            BackendSpec::Prefix { we } => {
                let reference = need_ref("prefix")?;
                let initial = match initial {
                    Some(i) => i.clone(),
                    None => {
                        let mut rng = seed::rng(seed::derive(&[session_seed, seed::hash_str("initial")]));
                        let text = corrupt_words(reference.text(), reference.lang(), *we, &mut rng);
                        Sentence::new(text, reference.lang().clone())
                            .expect("word substitution keeps a valid sentence")
                    }
                };
                Arc::new(PrefixOracleBackend::new(reference, initial, session_seed))
            }
            BackendSpec::Noisy { we, vr } => {
                let b = NoisyOracleBackend::new(need_ref("noisy")?, *we, *vr, session_seed);
                match initial {
                    Some(i) => Arc::new(b.with_initial(i.clone())),
                    None => Arc::new(b),
                }
            }
            BackendSpec::Wire { url } => Arc::new(WireBackend::new(url)),
            BackendSpec::Llm { url, model } => Arc::new(LlmBackend::new(url, model)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!("oracle".parse::<BackendSpec>().unwrap(), BackendSpec::Oracle);
        assert_eq!(
            "prefix".parse::<BackendSpec>().unwrap(),
            BackendSpec::Prefix { we: 0.3 }
        );
        assert_eq!(
            "noisy:we=0.3,vr=0.1".parse::<BackendSpec>().unwrap(),
            BackendSpec::Noisy { we: 0.3, vr: 0.1 }
        );
        assert_eq!(
            "wire:http://127.0.0.1:9000".parse::<BackendSpec>().unwrap(),
            BackendSpec::Wire {
                url: "http://127.0.0.1:9000".into()
            }
        );
        assert!(matches!(
            "llm:https://x/v1/chat/completions".parse::<BackendSpec>().unwrap(),
            BackendSpec::Llm { .. }
        ));
        for bad in ["", "gpt", "noisy:we=2", "noisy:xx=0.1", "noisy:we", "wire", "wire:", "oracle:1"] {
            assert!(bad.parse::<BackendSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["oracle", "prefix", "noisy:we=0.3,vr=0.1", "wire:http://h:1"] {
            assert_eq!(s.parse::<BackendSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn builtins_need_reference() {
        assert_eq!(
            BackendSpec::Oracle.instantiate(None, None, 0).err(),
            Some(SpecError::MissingReference("oracle"))
        );
        assert!(BackendSpec::Wire { url: "http://h".into() }
            .instantiate(None, None, 0)
            .is_ok());
    }
}
