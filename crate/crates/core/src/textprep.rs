//! Translation to English and text cleaning.
//!
//! Cleaning runs in a fixed order: URL removal, lower-casing, sigil
//! stripping (`@`, `#`), whitespace tokenization, stopword filtering, and a
//! single-space rejoin. Punctuation other than the sigils is kept.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum TextPrepError {
    #[error("stopword list for {0} is empty")]
    EmptyStopwords(String),
    #[error("translation failed: {0}")]
    Translation(String),
    #[error("translation table line {line}: {reason}")]
    BadTable { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    language: String,
    words: HashSet<String>,
}

impl StopwordList {
    /// One token per line; blank lines and `#` comments are ignored.
    pub fn from_lines(language: &str, src: &str) -> Result<Self, TextPrepError> {
        let words: HashSet<String> =
            src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect();
        if words.is_empty() && language == "en" {
            return Err(TextPrepError::EmptyStopwords(language.into()));
        }
        Ok(Self { language: language.to_string(), words })
    }

    pub fn load(language: &str, path: &Path) -> Result<Self, TextPrepError> {
        Self::from_lines(language, &fs::read_to_string(path)?)
    }

    pub fn english() -> Self {
        Self::from_lines("en", ENGLISH_STOPWORDS).expect("bundled stopwords are non-empty")
    }

    /// An empty list for callers that want no stopword filtering.
    pub fn empty(language: &str) -> Self {
        Self { language: language.to_string(), words: HashSet::new() }
    }

    pub fn with_words<'a>(language: &str, words: impl IntoIterator<Item = &'a str>) -> Self {
        Self { language: language.to_string(), words: words.into_iter().map(str::to_lowercase).collect() }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn strip_sigils(token: &str) -> &str {
    token.trim_start_matches(['@', '#'])
}

/// Scheme-prefixed (`https://`, `ftp://`, ...) or `www.`-prefixed token,
/// ignoring leading sigils and opening brackets/quotes.
pub fn is_url_token(token: &str) -> bool {
    let t = token.trim_start_matches(['@', '#', '(', '[', '<', '"', '\'']);
    let lower = t.to_ascii_lowercase();
    if lower.starts_with("www.") {
        return true;
    }
    match lower.find("://") {
        Some(i) if i > 0 => {
            let scheme = &lower[..i];
            scheme.starts_with(|c: char| c.is_ascii_alphabetic())
                && scheme.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-'))
        }
        _ => false,
    }
}

pub fn clean_text(text: &str, stopwords: &StopwordList) -> String {
    let without_urls: Vec<&str> = text.split_whitespace().filter(|t| !is_url_token(t)).collect();
    let lowered = without_urls.join(" ").to_lowercase();
    lowered
        .split_whitespace()
        .map(strip_sigils)
        // lower-casing can turn a non-ASCII scheme into an ASCII one
        .filter(|t| !t.is_empty() && !is_url_token(t) && !stopwords.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

pub trait Translator: Send + Sync {
    fn id(&self) -> &str;
    fn translate(&self, text: &str, source_lang: &str) -> Result<String, TextPrepError>;
    /// Requests sent to an external service so far.
    fn external_calls(&self) -> usize {
        0
    }
}

fn is_english(lang: &str) -> bool {
    let l = lang.trim().to_ascii_lowercase();
    l == "en" || l.starts_with("en-") || l.starts_with("en_")
}

/// English text (and empty text) passes through; anything else goes through
/// the translator, falling back to the original text with a warning.
pub fn translate_to_english(text: &str, lang: &str, t: &dyn Translator) -> String {
    if is_english(lang) || text.trim().is_empty() {
        return text.to_string();
    }
    t.translate(text, &lang.to_ascii_lowercase()).unwrap_or_else(|e| {
        warn!("translation from {lang} via {} failed, keeping original: {e}", t.id());
        text.to_string()
    })
}

/// Returns the input unchanged.
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn id(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _source_lang: &str) -> Result<String, TextPrepError> {
        Ok(text.to_string())
    }
}

fn escape_field(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r")
}

fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// Parses `lang<TAB>source<TAB>target` lines (backslash escapes for tab/newline).
fn parse_table(src: &str) -> Result<HashMap<(String, String), String>, TextPrepError> {
    let mut out = HashMap::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(lang), Some(source), Some(target)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(TextPrepError::BadTable { line: i + 1, reason: "expected lang<TAB>source<TAB>target".into() });
        };
        out.insert((lang.to_ascii_lowercase(), unescape_field(source)), unescape_field(target));
    }
    Ok(out)
}

/// Table-driven translator. Whole-text entries win; otherwise each
/// whitespace token is looked up (case-insensitively) and replaced when known.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    entries: HashMap<(String, String), String>,
}

impl DictionaryTranslator {
    pub fn new<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Self {
        Self { entries: entries.into_iter().map(|(l, s, t)| ((l.to_ascii_lowercase(), s.to_string()), t.to_string())).collect() }
    }

    pub fn load(path: &Path) -> Result<Self, TextPrepError> {
        Ok(Self { entries: parse_table(&fs::read_to_string(path)?)? })
    }
}

impl Translator for DictionaryTranslator {
    fn id(&self) -> &str {
        "dictionary"
    }

    fn translate(&self, text: &str, source_lang: &str) -> Result<String, TextPrepError> {
        let lang = source_lang.to_ascii_lowercase();
        if let Some(t) = self.entries.get(&(lang.clone(), text.to_string())) {
            return Ok(t.clone());
        }
        Ok(text
            .split_whitespace()
            .map(|w| {
                self.entries
                    .get(&(lang.clone(), w.to_string()))
                    .or_else(|| self.entries.get(&(lang.clone(), w.to_lowercase())))
                    .map_or(w, String::as_str)
            })
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Client for a LibreTranslate-compatible `POST /translate` endpoint.
pub struct HttpTranslator {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    calls: AtomicUsize,
}

impl HttpTranslator {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, TextPrepError> {
        let client =
            reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| TextPrepError::Translation(e.to_string()))?;
        Ok(Self { client, endpoint: endpoint.to_string(), api_key, calls: AtomicUsize::new(0) })
    }
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
    format: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    api_key: Option<&'a str>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TranslateResponse {
    translated_text: String,
}

impl Translator for HttpTranslator {
    fn id(&self) -> &str {
        "http"
    }

    fn translate(&self, text: &str, source_lang: &str) -> Result<String, TextPrepError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let req = TranslateRequest { q: text, source: source_lang, target: "en", format: "text", api_key: self.api_key.as_deref() };
        let resp = self.client.post(&self.endpoint).json(&req).send().map_err(|e| TextPrepError::Translation(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(TextPrepError::Translation(format!("HTTP {}", resp.status())));
        }
        let body: TranslateResponse = resp.json().map_err(|e| TextPrepError::Translation(e.to_string()))?;
        Ok(body.translated_text)
    }

    fn external_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Wraps a translator with a persistent `(source language, text) -> English`
/// cache that is consulted before the inner translator is called.
pub struct CachedTranslator {
    inner: Box<dyn Translator>,
    cache: RwLock<HashMap<(String, String), String>>,
    cache_file: Option<PathBuf>,
    write_lock: Mutex<()>,
    misses: AtomicUsize,
}

impl CachedTranslator {
    pub fn new(inner: Box<dyn Translator>) -> Self {
        Self { inner, cache: RwLock::new(HashMap::new()), cache_file: None, write_lock: Mutex::new(()), misses: AtomicUsize::new(0) }
    }

    pub fn with_cache_file(mut self, path: &Path) -> Result<Self, TextPrepError> {
        if path.exists() {
            let table = parse_table(&fs::read_to_string(path)?)?;
            self.cache.get_mut().unwrap().extend(table);
        }
        self.cache_file = Some(path.to_path_buf());
        Ok(self)
    }

    /// Lookups that went to the inner translator.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }
}

impl Translator for CachedTranslator {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn translate(&self, text: &str, source_lang: &str) -> Result<String, TextPrepError> {
        let key = (source_lang.to_ascii_lowercase(), text.to_string());
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let out = self.inner.translate(text, source_lang)?;
        let _guard = self.write_lock.lock().unwrap();
        self.cache.write().unwrap().insert(key.clone(), out.clone());
        if let Some(path) = &self.cache_file {
            let line = format!("{}\t{}\t{}\n", key.0, escape_field(text), escape_field(&out));
            if let Err(e) = OpenOptions::new().create(true).append(true).open(path).and_then(|mut f| f.write_all(line.as_bytes())) {
                warn!("translation cache write failed: {e}");
            }
        }
        Ok(out)
    }

    fn external_calls(&self) -> usize {
        self.inner.external_calls()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Unreachable;
    impl Translator for Unreachable {
        fn id(&self) -> &str {
            "down"
        }
        fn translate(&self, _: &str, _: &str) -> Result<String, TextPrepError> {
            Err(TextPrepError::Translation("connection refused".into()))
        }
    }

    #[test]
    fn translation_examples() {
        let stub = DictionaryTranslator::new([("es", "hola", "hello")]);
        assert_eq!(translate_to_english("hello", "en", &stub), "hello");
        assert_eq!(translate_to_english("hola", "es", &stub), "hello");
        assert_eq!(translate_to_english("hola amigo", "es", &stub), "hello amigo");
        assert_eq!(translate_to_english("hola", "es", &Unreachable), "hola");
        assert_eq!(translate_to_english("anything", "EN-us", &Unreachable), "anything");
    }

    #[test]
    fn cache_consulted_first_and_persisted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tr.cache");
        let t = CachedTranslator::new(Box::new(DictionaryTranslator::new([("fr", "bonjour\tmonde", "hello\tworld")])))
            .with_cache_file(&path)
            .unwrap();
        assert_eq!(t.translate("bonjour\tmonde", "fr").unwrap(), "hello\tworld");
        assert_eq!(t.translate("bonjour\tmonde", "fr").unwrap(), "hello\tworld");
        assert_eq!(t.misses(), 1);

        let warm = CachedTranslator::new(Box::new(Unreachable)).with_cache_file(&path).unwrap();
        assert_eq!(warm.translate("bonjour\tmonde", "fr").unwrap(), "hello\tworld");
        assert_eq!(warm.misses(), 0);
    }

    #[test]
    fn clean_examples() {
        let sw = StopwordList::with_words("en", ["now"]);
        assert_eq!(clean_text("Check https://x.co NOW", &sw), "check");
        assert_eq!(clean_text("", &sw), "");
        assert_eq!(clean_text("#Vote @maria", &StopwordList::empty("en")), "vote maria");
        assert_eq!(clean_text("See www.example.org, it's TRUE!", &StopwordList::english()), "see it's true!");
        assert_eq!(clean_text("#https://evil.example x", &StopwordList::empty("en")), "x");
    }

    #[test]
    fn url_tokens() {
        assert!(is_url_token("https://t.co/abc"));
        assert!(is_url_token("(http://x.y)"));
        assert!(is_url_token("WWW.example.com"));
        assert!(!is_url_token("://nothing"));
        assert!(!is_url_token("ratio:3"));
        assert!(!is_url_token("1://x"));
    }

    #[test]
    fn english_stopwords_bundled() {
        let sw = StopwordList::english();
        assert!(sw.contains("The"));
        assert!(!sw.contains("vaccine"));
        assert!(StopwordList::from_lines("en", "\n# none\n").is_err());
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(s in "(\\PC|[#@ ]|https://x\\.y|www\\.z)*") {
            let sw = StopwordList::english();
            let once = clean_text(&s, &sw);
            prop_assert_eq!(clean_text(&once, &sw), once.clone());
            for tok in once.split(' ').filter(|t| !t.is_empty()) {
                prop_assert!(!is_url_token(tok));
                prop_assert!(!sw.contains(tok));
            }
        }

        #[test]
        fn english_translation_is_identity(s in "\\PC*") {
            prop_assert_eq!(translate_to_english(&s, "en", &Unreachable), s);
        }
    }
}
