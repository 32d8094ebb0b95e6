//! Sentences, word segmentation and character-span bookkeeping.
//!
//! Every index in this crate is a character (code point) index, never a byte
//! offset. Word segmentation is whitespace based, except for Chinese targets
//! where each CJK character is a word of its own.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("sentence has leading or trailing whitespace")]
    UntrimmedSentence,
    #[error("sentence contains control character U+{0:04X}")]
    ControlCharacter(u32),
    #[error("word range {start}..={end} out of bounds for {count} words")]
    WordRange {
        start: usize,
        end: usize,
        count: usize,
    },
}

/// Half-open character span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span {start}..{end}");
        Self { start, end }
    }

    /// Zero-width span marking an insertion point.
    pub fn at(pos: usize) -> Self {
        Self {
            start: pos,
            end: pos,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for CharSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Language code such as `en`, `de` or `zh`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lang(String);

impl Lang {
    pub fn new(code: impl Into<String>) -> Self {
        Self(code.into())
    }

    pub fn code(&self) -> &str {
        &self.0
    }

    /// Chinese targets are segmented per character.
    pub fn is_per_character(&self) -> bool {
        let code = self.0.to_ascii_lowercase();
        code == "zh" || code.starts_with("zh-") || code.starts_with("zh_")
    }

    /// English name used in natural-language prompts; unknown codes are
    /// returned verbatim.
    pub fn display_name(&self) -> &str {
        let primary = self.0.split(['-', '_']).next().unwrap_or("");
        match primary.to_ascii_lowercase().as_str() {
            "en" => "English",
            "de" => "German",
            "zh" => "Chinese",
            "fr" => "French",
            "es" => "Spanish",
            "it" => "Italian",
            "ja" => "Japanese",
            "ko" => "Korean",
            "ru" => "Russian",
            "pt" => "Portuguese",
            "nl" => "Dutch",
            "cs" => "Czech",
            "ro" => "Romanian",
            "ar" => "Arabic",
            _ => &self.0,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Lang {
    fn from(code: &str) -> Self {
        Self::new(code)
    }
}

/// A single-line sentence in a known language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SentenceRepr", into = "SentenceRepr")]
pub struct Sentence {
    text: String,
    lang: Lang,
}

#[derive(Serialize, Deserialize)]
struct SentenceRepr {
    text: String,
    lang: Lang,
}

impl TryFrom<SentenceRepr> for Sentence {
    type Error = TextError;

    fn try_from(repr: SentenceRepr) -> Result<Self, Self::Error> {
        Sentence::new(repr.text, repr.lang)
    }
}

impl From<Sentence> for SentenceRepr {
    fn from(s: Sentence) -> Self {
        SentenceRepr {
            text: s.text,
            lang: s.lang,
        }
    }
}

impl Sentence {
    pub fn new(text: impl Into<String>, lang: impl Into<Lang>) -> Result<Self, TextError> {
        let text = text.into();
        validate_sentence_text(&text)?;
        Ok(Self {
            text,
            lang: lang.into(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }

    pub fn into_text(self) -> String {
        self.text
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn tokenize(&self) -> WordSegmentation {
        tokenize(&self.text, &self.lang)
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn validate_sentence_text(text: &str) -> Result<(), TextError> {
    if text.trim() != text {
        return Err(TextError::UntrimmedSentence);
    }
    if let Some(c) = text.chars().find(|c| c.is_control()) {
        return Err(TextError::ControlCharacter(c as u32));
    }
    Ok(())
}

/// CJK ideographs, CJK punctuation and full-width forms.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3000..=0x303F
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0xFF00..=0xFFEF
        | 0x20000..=0x2FFFF)
}

/// Words and the separators around them.
///
/// `separators` has one more entry than `words`: the material before the
/// first word, between each pair of words, and after the last word. Reading
/// `separators[0], words[0], separators[1], ..., words[n-1], separators[n]`
/// reproduces the text exactly. Separators between adjacent CJK characters
/// are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSegmentation {
    pub words: Vec<CharSpan>,
    pub separators: Vec<CharSpan>,
}

impl WordSegmentation {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Smallest span covering words `first..=last`, outer separators excluded.
    pub fn char_span_of(&self, first: usize, last: usize) -> Result<CharSpan, TextError> {
        if first > last || last >= self.words.len() {
            return Err(TextError::WordRange {
                start: first,
                end: last,
                count: self.words.len(),
            });
        }
        Ok(CharSpan::new(self.words[first].start, self.words[last].end))
    }
}

pub fn char_span_of(
    words: &WordSegmentation,
    first: usize,
    last: usize,
) -> Result<CharSpan, TextError> {
    words.char_span_of(first, last)
}

pub fn tokenize(text: &str, lang: &Lang) -> WordSegmentation {
    let chars: Vec<char> = text.chars().collect();
    tokenize_chars(&chars, lang.is_per_character())
}

pub fn tokenize_chars(chars: &[char], per_character_cjk: bool) -> WordSegmentation {
    let mut words = Vec::new();
    let mut separators = Vec::new();
    let mut sep_start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        separators.push(CharSpan::new(sep_start, i));
        let start = i;
        if per_character_cjk && is_cjk(c) {
            i += 1;
        } else {
            while i < chars.len()
                && !chars[i].is_whitespace()
                && !(per_character_cjk && is_cjk(chars[i]))
            {
                i += 1;
            }
        }
        words.push(CharSpan::new(start, i));
        sep_start = i;
    }
    separators.push(CharSpan::new(sep_start, chars.len()));
    WordSegmentation { words, separators }
}

/// A sentence held as characters together with its segmentation.
#[derive(Debug, Clone)]
pub struct Tokens {
    pub chars: Vec<char>,
    pub seg: WordSegmentation,
}

impl Tokens {
    pub fn new(text: &str, lang: &Lang) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let seg = tokenize_chars(&chars, lang.is_per_character());
        Self { chars, seg }
    }

    pub fn word_count(&self) -> usize {
        self.seg.words.len()
    }

    pub fn word(&self, i: usize) -> String {
        self.slice(self.seg.words[i])
    }

    pub fn words(&self) -> Vec<String> {
        (0..self.word_count()).map(|i| self.word(i)).collect()
    }

    pub fn slice(&self, span: CharSpan) -> String {
        self.chars[span.start..span.end].iter().collect()
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}
