//! Parallel corpora, deterministic sampling and session log files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::session::SessionLog;
use crate::text::{Lang, Sentence};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("cannot sample {requested} pairs from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("unknown corpus format {0:?} (expected tsv or jsonl)")]
    UnknownFormat(String),
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(line: usize, message: impl Into<String>) -> Self {
        CorpusError::Malformed {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            _ => Err(CorpusError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPair {
    pub source: Sentence,
    /// Absent only in human-mode corpora.
    pub reference: Option<Sentence>,
    /// Fixed first hypothesis for backends that take one.
    pub initial: Option<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<CorpusPair>,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonPair {
    src: String,
    #[serde(default, rename = "ref")]
    reference: Option<String>,
    #[serde(default)]
    hyp: Option<String>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn load(path: &Path, format: CorpusFormat, src_lang: Lang, tgt_lang: Lang) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        Self::read(BufReader::new(file), format, src_lang, tgt_lang).map_err(|e| match e {
            CorpusError::Io { source, .. } => CorpusError::io(path, source),
            other => other,
        })
    }

    /// Parses one pair per non-empty line: `source<TAB>reference[<TAB>initial]`
    /// or `{"src", "ref", "hyp"?}`.
    pub fn read<R: BufRead>(input: R, format: CorpusFormat, src_lang: Lang, tgt_lang: Lang) -> Result<Self, CorpusError> {
        let mut pairs = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| CorpusError::io(Path::new("<input>"), e))?;
            let line = line.strip_prefix('\u{feff}').filter(|_| n == 1).unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let (src, reference, initial) = match format {
                CorpusFormat::Tsv => {
                    let cols: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
                    match cols.as_slice() {
                        [s, r] => (s.to_string(), Some(r.to_string()), None),
                        [s, r, h] => (s.to_string(), Some(r.to_string()), Some(h.to_string())),
                        _ => {
                            return Err(CorpusError::malformed(
                                n,
                                format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
                            ))
                        }
                    }
                }
                CorpusFormat::Jsonl => {
                    let p: JsonPair = serde_json::from_str(line).map_err(|e| CorpusError::malformed(n, e.to_string()))?;
                    (p.src, p.reference, p.hyp)
                }
            };
            let sentence = |text: &str, lang: &Lang, what: &str| {
                Sentence::new(text.trim(), lang.clone()).map_err(|e| CorpusError::malformed(n, format!("{what}: {e}")))
            };
            let source = sentence(&src, &src_lang, "source")?;
            if source.text().is_empty() {
                return Err(CorpusError::malformed(n, "empty source"));
            }
            pairs.push(CorpusPair {
                source,
                reference: reference.map(|r| sentence(&r, &tgt_lang, "reference")).transpose()?,
                initial: initial.map(|h| sentence(&h, &tgt_lang, "initial hypothesis")).transpose()?,
            });
        }
        Ok(Self {
            pairs,
            src_lang,
            tgt_lang,
        })
    }

    /// Uniform sample without replacement, keeping corpus order.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Self, CorpusError> {
        if n > self.pairs.len() {
            return Err(CorpusError::SampleTooLarge {
                requested: n,
                available: self.pairs.len(),
            });
        }
        let mut rng = seed::rng(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.pairs.len(), n).into_vec();
        idx.sort_unstable();
        Ok(Self {
            pairs: idx.into_iter().map(|i| self.pairs[i].clone()).collect(),
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
        })
    }
}

pub fn write_logs(path: &Path, logs: &[SessionLog]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for log in logs {
        writeln!(w, "{}", log.to_json_line()).map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn read_logs(path: &Path) -> Result<Vec<SessionLog>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_logs(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

pub fn parse_logs<R: BufRead>(input: R) -> Result<Vec<SessionLog>, CorpusError> {
    let mut logs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(Path::new("<input>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        logs.push(serde_json::from_str(&line).map_err(|e| CorpusError::malformed(i + 1, e.to_string()))?);
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn read(text: &str, f: CorpusFormat) -> Result<ParallelCorpus, CorpusError> {
        ParallelCorpus::read(text.as_bytes(), f, Lang::new("de"), Lang::new("en"))
    }

    #[test]
    fn tsv_pairs() {
        let c = read("a\tb\n", CorpusFormat::Tsv).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.pairs[0].source.text(), "a");
        assert_eq!(c.pairs[0].reference.as_ref().unwrap().text(), "b");
        let c = read("a\tb\tc\n\n x \t y \n", CorpusFormat::Tsv).unwrap();
        assert_eq!(c.pairs[0].initial.as_ref().unwrap().text(), "c");
        assert_eq!(c.pairs[1].source.text(), "x");
    }

    #[test]
    fn tsv_errors_name_the_line() {
        let e = read("no tab here\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(e, CorpusError::Malformed { line: 1, .. }), "{e}");
        let e = read("a\tb\n\nc\td\te\tf\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(e, CorpusError::Malformed { line: 3, .. }), "{e}");
        let e = read("\tb\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(e, CorpusError::Malformed { line: 1, .. }), "{e}");
    }

    #[test]
    fn jsonl_pairs() {
        let c = read("{\"src\":\"x\",\"ref\":\"y\"}\n{\"src\":\"p\",\"ref\":\"q\",\"hyp\":\"r\"}\n", CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.pairs[0].reference.as_ref().unwrap().text(), "y");
        assert_eq!(c.pairs[1].initial.as_ref().unwrap().text(), "r");
        let c = read("{\"src\":\"x\"}\n", CorpusFormat::Jsonl).unwrap();
        assert!(c.pairs[0].reference.is_none());
        let e = read("{\"src\":\"x\",\"ref\":\"y\"}\n{\"src\":1}\n", CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(e, CorpusError::Malformed { line: 2, .. }), "{e}");
    }

    #[test]
    fn sampling() {
        let text: String = (0..5).map(|i| format!("s{i}\tr{i}\n")).collect();
        let c = read(&text, CorpusFormat::Tsv).unwrap();
        assert_eq!(c.sample(5, 3).unwrap(), c);
        assert_eq!(c.sample(2, 9).unwrap(), c.sample(2, 9).unwrap());
        assert!(matches!(c.sample(6, 0), Err(CorpusError::SampleTooLarge { .. })));
        let s = c.sample(3, 1).unwrap();
        let order: Vec<_> = s.pairs.iter().map(|p| p.source.text().to_string()).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
        let distinct: HashSet<Vec<String>> = (0..100)
            .map(|seed| {
                c.sample(2, seed)
                    .unwrap()
                    .pairs
                    .iter()
                    .map(|p| p.source.text().to_string())
                    .collect()
            })
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn log_files_round_trip() {
        use crate::backends::OracleBackend;
        use crate::session::{run_session, SessionConfig};
        use crate::simulator::PolicyKind;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs.jsonl");
        write_logs(&path, &[]).unwrap();
        assert!(read_logs(&path).unwrap().is_empty());
        let r = Sentence::new("a b", "en").unwrap();
        let cfg = SessionConfig {
            source: Sentence::new("x", "de").unwrap(),
            reference: Some(r.clone()),
            tgt_lang: Lang::new("en"),
            policy: PolicyKind::L2r,
            backend: "oracle".into(),
            seed: 1,
            turn_limit_override: None,
        };
        let log = run_session(&cfg, &OracleBackend::new(r)).unwrap();
        write_logs(&path, std::slice::from_ref(&log)).unwrap();
        assert_eq!(read_logs(&path).unwrap(), vec![log.clone()]);
        std::fs::write(&path, format!("{}\n{{broken\n", log.to_json_line())).unwrap();
        let e = read_logs(&path).unwrap_err();
        assert!(matches!(e, CorpusError::Malformed { line: 2, .. }), "{e}");
        assert!(matches!(read_logs(&dir.path().join("missing")), Err(CorpusError::Io { .. })));
    }
}
