use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{elapsed_ms, into_hypothesis, Backend, BackendError, TranslationRequest, TranslationResponse};
use crate::seed;
use crate::template::{matches, LexicalTemplate, Segment};
use crate::text::{is_cjk, tokenize, Lang, Sentence};

/// Substitute words used to corrupt hypotheses.
#[derive(Debug, Clone, Copy)]
pub struct ConfusionVocabulary {
    pub latin: &'static [&'static str],
    pub cjk: &'static [&'static str],
}

pub const DEFAULT_CONFUSION: ConfusionVocabulary = ConfusionVocabulary {
    latin: &[
        "lorem", "ipsum", "dolor", "amet", "zeta", "quux", "blip", "norf", "vex", "mox",
    ],
    cjk: &["甲", "乙", "丙", "丁", "戊", "己", "庚", "辛"],
};

impl ConfusionVocabulary {
    /// A substitute for `word` that differs from it.
    pub fn substitute(&self, word: &str, rng: &mut ChaCha8Rng) -> &'static str {
        let pool = if word.chars().next().is_some_and(is_cjk) {
            self.cjk
        } else {
            self.latin
        };
        let candidates: Vec<&'static str> = pool.iter().copied().filter(|w| *w != word).collect();
        candidates.choose(rng).copied().expect("vocabulary has two or more entries")
    }
}

/// Replaces each word of `text` independently with probability `rate`,
/// keeping the separators untouched.
pub fn corrupt_words(text: &str, lang: &Lang, rate: f64, rng: &mut ChaCha8Rng) -> String {
    if rate <= 0.0 {
        return text.to_string();
    }
    let chars: Vec<char> = text.chars().collect();
    let seg = tokenize(text, lang);
    let mut out = String::with_capacity(text.len());
    for (i, word) in seg.words.iter().enumerate() {
        let sep = seg.separators[i];
        out.extend(&chars[sep.start..sep.end]);
        let w: String = chars[word.start..word.end].iter().collect();
        if rng.gen_bool(rate.min(1.0)) {
            out.push_str(DEFAULT_CONFUSION.substitute(&w, rng));
        } else {
            out.push_str(&w);
        }
    }
    let last = seg.separators[seg.words.len()];
    out.extend(&chars[last.start..last.end]);
    out
}

/// Per-request random stream: a pure function of the backend seed, the
/// source sentence and the template, so repeated requests repeat answers.
fn request_rng(seed: u64, req: &TranslationRequest) -> ChaCha8Rng {
    let tpl = req.template.as_ref().map(LexicalTemplate::to_json);
    seed::rng(seed::derive(&[
        seed,
        seed::hash_str(req.source.text()),
        seed::hash_str(tpl.as_deref().unwrap_or("")),
    ]))
}

fn respond(
    id: &str,
    text: &str,
    lang: &Lang,
    start: Instant,
) -> Result<TranslationResponse, BackendError> {
    Ok(TranslationResponse {
        hypothesis: into_hypothesis(text, lang)?,
        latency_ms: elapsed_ms(start),
        backend_id: id.to_string(),
    })
}

/// Always answers with the reference.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    reference: Sentence,
}

impl OracleBackend {
    pub fn new(reference: Sentence) -> Self {
        Self { reference }
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> &str {
        "oracle"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        respond(self.id(), self.reference.text(), &req.tgt_lang, start)
    }
}

/// Stand-in for a prefix-constrained decoder: serves only prefix templates,
/// completing a correct prefix to the reference and a wrong one with
/// random words.
#[derive(Debug, Clone)]
pub struct PrefixOracleBackend {
    reference: Sentence,
    initial: Sentence,
    seed: u64,
}

impl PrefixOracleBackend {
    pub fn new(reference: Sentence, initial: Sentence, seed: u64) -> Self {
        Self {
            reference,
            initial,
            seed,
        }
    }

    fn random_suffix(&self, prefix: &str, lang: &Lang, rng: &mut ChaCha8Rng) -> String {
        let ref_words = tokenize(self.reference.text(), lang).len();
        let prefix_words = tokenize(prefix, lang).len();
        let n = ref_words.saturating_sub(prefix_words).max(1);
        let joiner = if lang.is_per_character() { "" } else { " " };
        let words: Vec<&str> = (0..n)
            .map(|_| {
                let pool = if lang.is_per_character() {
                    DEFAULT_CONFUSION.cjk
                } else {
                    DEFAULT_CONFUSION.latin
                };
                *pool.choose(rng).expect("non-empty vocabulary")
            })
            .collect();
        let mut out = prefix.to_string();
        if !prefix.is_empty() && !prefix.ends_with(char::is_whitespace) {
            out.push_str(joiner);
        }
        out.push_str(&words.join(joiner));
        out
    }
}

impl Backend for PrefixOracleBackend {
    fn id(&self) -> &str {
        "prefix"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        let Some(tpl) = &req.template else {
            return respond(self.id(), self.initial.text(), &req.tgt_lang, start);
        };
        let prefix = tpl.as_prefix().ok_or_else(|| {
            BackendError::Unsupported("prefix backend serves prefix templates only".into())
        })?;
        let text = if !tpl.has_blank() {
            prefix.to_string()
        } else if self.reference.text().starts_with(prefix) {
            self.reference.text().to_string()
        } else {
            let mut rng = request_rng(self.seed, req);
            self.random_suffix(prefix, &req.tgt_lang, &mut rng)
        };
        respond(self.id(), &text, &req.tgt_lang, start)
    }
}

/// Oracle with seeded word noise and deliberate constraint violations.
#[derive(Debug, Clone)]
pub struct NoisyOracleBackend {
    reference: Sentence,
    initial: Option<Sentence>,
    word_error_rate: f64,
    violation_rate: f64,
    seed: u64,
}

impl NoisyOracleBackend {
    pub fn new(reference: Sentence, word_error_rate: f64, violation_rate: f64, seed: u64) -> Self {
        Self {
            reference,
            initial: None,
            word_error_rate: word_error_rate.clamp(0.0, 1.0),
            violation_rate: violation_rate.clamp(0.0, 1.0),
            seed,
        }
    }

    /// Answers unconstrained requests with `initial` instead of a corrupted
    /// reference.
    pub fn with_initial(mut self, initial: Sentence) -> Self {
        self.initial = Some(initial);
        self
    }

    /// Blank fills from the reference when the template admits it, empty
    /// fills otherwise.
    fn fills(&self, tpl: &LexicalTemplate) -> Vec<String> {
        match matches(tpl, self.reference.text()).witness {
            Some(w) => w.fills,
            None => vec![String::new(); tpl.blank_count()],
        }
    }

    fn assemble(
        &self,
        tpl: &LexicalTemplate,
        fills: &[String],
        skip: Option<usize>,
        lang: &Lang,
        rng: &mut ChaCha8Rng,
    ) -> String {
        let mut out = String::new();
        let mut fill = fills.iter();
        for (i, seg) in tpl.segments.iter().enumerate() {
            match seg {
                Segment::Constraint { text } if skip != Some(i) => out.push_str(text),
                Segment::Constraint { .. } => {}
                Segment::Blank { .. } => {
                    let f = fill.next().expect("one fill per blank");
                    out.push_str(&corrupt_words(f, lang, self.word_error_rate, rng));
                }
            }
        }
        out
    }

    fn violating(
        &self,
        tpl: &LexicalTemplate,
        fills: &[String],
        lang: &Lang,
        rng: &mut ChaCha8Rng,
    ) -> String {
        let mut order: Vec<usize> = (0..tpl.segments.len())
            .filter(|&i| !tpl.segments[i].is_blank())
            .collect();
        order.shuffle(rng);
        for skip in order {
            let out = self.assemble(tpl, fills, Some(skip), lang, rng);
            if !matches(tpl, out.trim()).satisfied {
                return out;
            }
        }
        // Shorter than the constraints combined, so nothing can match it.
        let mut all: String = tpl.constraints().collect();
        all.pop();
        all
    }
}

impl Backend for NoisyOracleBackend {
    fn id(&self) -> &str {
        "noisy"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResponse, BackendError> {
        let start = Instant::now();
        req.validate()?;
        let lang = &req.tgt_lang;
        let mut rng = request_rng(self.seed, req);
        let text = match &req.template {
            None => match &self.initial {
                Some(initial) => initial.text().to_string(),
                None => corrupt_words(self.reference.text(), lang, self.word_error_rate, &mut rng),
            },
            Some(tpl) => {
                let fills = self.fills(tpl);
                let violate = self.violation_rate > 0.0
                    && tpl.constraints().next().is_some()
                    && rng.gen_bool(self.violation_rate);
                if violate {
                    self.violating(tpl, &fills, lang, &mut rng)
                } else {
                    self.assemble(tpl, &fills, None, lang, &mut rng)
                }
            }
        };
        respond(self.id(), &text, lang, start)
    }
}
