//! Tweet records, verdict normalization, manifest loading and stratified splits.
//!
//! A manifest is a UTF-8 file with one JSON object per line. Field names match
//! [`TweetRecord`] and [`UserSnapshot`] exactly. Records that fail validation
//! are collected into a rejects report (`<manifest>.rejects`, one
//! `tweet_id<TAB>reason` line per failure) and never abort loading.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Highest manifest schema version this build understands.
pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_VERDICT_ALIASES: &str = include_str!("../data/verdict_aliases.tsv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record {tweet_id}: {reason}")]
    MalformedRecord { tweet_id: String, reason: String },
    #[error("manifest not found: {}", .0.display())]
    ManifestNotFound(PathBuf),
    #[error("manifest {} contains no valid records", .0.display())]
    EmptyDataset(PathBuf),
    #[error("class {label} has {count} records, need at least 2 to split")]
    InsufficientClassSize { label: BinaryLabel, count: usize },
    #[error("test fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("verdict alias table line {line}: {reason}")]
    BadAliasTable { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSnapshot {
    pub handle: String,
    pub display_name: String,
    pub followers_count: u64,
    pub friends_count: u64,
    pub favorites_count: u64,
    pub statuses_count: u64,
    pub verified: bool,
    pub account_created_at: DateTime<Utc>,
}

/// One social-media post with its author snapshot and fact-checker verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub text: String,
    pub language: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_path: Option<PathBuf>,
    pub user: UserSnapshot,
    pub retweet_count: u64,
    pub favourite_count: u64,
    pub retweeted: bool,
    pub raw_verdict: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictClass {
    False,
    True,
    PartiallyFalse,
    Other,
}

impl VerdictClass {
    fn from_config_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "false" => Some(Self::False),
            "true" => Some(Self::True),
            "partially_false" => Some(Self::PartiallyFalse),
            "other" => Some(Self::Other),
            _ => None,
        }
    }
}

/// Binary target. The positive class is `Misinformation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Misinformation,
    Other,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Misinformation, BinaryLabel::Other];

    pub fn is_positive(self) -> bool {
        self == BinaryLabel::Misinformation
    }

    /// Class index used by classifiers: Misinformation = 1, Other = 0.
    pub fn index(self) -> usize {
        match self {
            BinaryLabel::Misinformation => 1,
            BinaryLabel::Other => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryLabel::Misinformation => "misinformation",
            BinaryLabel::Other => "other",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Case-insensitive alias table mapping published verdict strings to the
/// four normalized classes.
#[derive(Debug, Clone)]
pub struct VerdictAliases {
    map: HashMap<String, VerdictClass>,
}

fn alias_key(s: &str) -> String {
    s.to_lowercase().replace(['-', '_'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

impl VerdictAliases {
    /// Parses `alias<TAB>class` lines; `#` starts a comment line.
    pub fn from_tsv(src: &str) -> Result<Self, CorpusError> {
        let mut map = HashMap::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (alias, class) = line
                .split_once('\t')
                .ok_or_else(|| CorpusError::BadAliasTable { line: i + 1, reason: "expected alias<TAB>class".into() })?;
            let class = VerdictClass::from_config_name(class)
                .ok_or_else(|| CorpusError::BadAliasTable { line: i + 1, reason: format!("unknown class {class:?}") })?;
            let key = alias_key(alias);
            if key.is_empty() {
                return Err(CorpusError::BadAliasTable { line: i + 1, reason: "empty alias".into() });
            }
            map.insert(key, class);
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }

    pub fn normalize(&self, raw_verdict: &str) -> VerdictClass {
        self.map.get(&alias_key(raw_verdict)).copied().unwrap_or(VerdictClass::Other)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl Default for VerdictAliases {
    fn default() -> Self {
        Self::from_tsv(DEFAULT_VERDICT_ALIASES).expect("bundled verdict alias table is valid")
    }
}

/// Maps a published verdict to one of the four classes; unknown strings map to `Other`.
pub fn normalize_verdict(raw_verdict: &str, aliases: &VerdictAliases) -> VerdictClass {
    aliases.normalize(raw_verdict)
}

pub fn binarize_label(v: VerdictClass) -> BinaryLabel {
    match v {
        VerdictClass::False | VerdictClass::PartiallyFalse => BinaryLabel::Misinformation,
        VerdictClass::True | VerdictClass::Other => BinaryLabel::Other,
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    // Twitter API v1.1 style: "Wed Oct 10 20:19:24 +0000 2018"
    DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y").ok().map(|t| t.with_timezone(&Utc))
}

struct FieldReader<'a> {
    obj: &'a serde_json::Map<String, Value>,
    tweet_id: &'a str,
    prefix: &'static str,
}

impl<'a> FieldReader<'a> {
    fn err(&self, reason: String) -> CorpusError {
        CorpusError::MalformedRecord { tweet_id: self.tweet_id.to_string(), reason }
    }

    fn field(&self, name: &str) -> Result<&'a Value, CorpusError> {
        match self.obj.get(name) {
            Some(Value::Null) | None => Err(self.err(format!("missing field {}{name}", self.prefix))),
            Some(v) => Ok(v),
        }
    }

    fn string(&self, name: &str) -> Result<String, CorpusError> {
        self.field(name)?.as_str().map(str::to_string).ok_or_else(|| self.err(format!("field {}{name} is not a string", self.prefix)))
    }

    fn opt_string(&self, name: &str) -> Result<Option<String>, CorpusError> {
        match self.obj.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if s.is_empty() => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.err(format!("field {}{name} is not a string", self.prefix))),
        }
    }

    fn count(&self, name: &str) -> Result<u64, CorpusError> {
        let v = self.field(name)?;
        if let Some(n) = v.as_u64() {
            return Ok(n);
        }
        match v.as_i64() {
            Some(n) if n < 0 => Err(self.err(format!("negative count {}{name} = {n}", self.prefix))),
            _ => Err(self.err(format!("field {}{name} is not a non-negative integer", self.prefix))),
        }
    }

    fn boolean(&self, name: &str) -> Result<bool, CorpusError> {
        self.field(name)?.as_bool().ok_or_else(|| self.err(format!("field {}{name} is not a boolean", self.prefix)))
    }

    fn timestamp(&self, name: &str) -> Result<DateTime<Utc>, CorpusError> {
        let s = self.string(name)?;
        parse_timestamp(&s).ok_or_else(|| self.err(format!("unparsable timestamp {}{name} = {s:?}", self.prefix)))
    }

    fn string_list(&self, name: &str) -> Result<Vec<String>, CorpusError> {
        match self.obj.get(name) {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str().map(str::to_string).ok_or_else(|| self.err(format!("field {}{name} holds a non-string entry", self.prefix)))
                })
                .collect(),
            Some(_) => Err(self.err(format!("field {}{name} is not a list", self.prefix))),
        }
    }
}

/// Validates one structured record. Optional fields (`media_path`, `hashtags`,
/// `mentions`, `language`) default to absent, empty, or `"en"`.
pub fn parse_tweet(document: &Value) -> Result<TweetRecord, CorpusError> {
    let obj = document
        .as_object()
        .ok_or_else(|| CorpusError::MalformedRecord { tweet_id: "<unknown>".into(), reason: "record is not an object".into() })?;
    let tweet_id = match obj.get("tweet_id") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(CorpusError::MalformedRecord { tweet_id: "<unknown>".into(), reason: "missing field tweet_id".into() }),
    };
    let r = FieldReader { obj, tweet_id: &tweet_id, prefix: "" };

    if let Some(v) = obj.get("schema_version") {
        match v.as_u64() {
            Some(n) if n >= 1 && n <= SCHEMA_VERSION as u64 => {}
            _ => return Err(r.err(format!("unsupported schema_version {v}"))),
        }
    }

    let text = r.string("text")?;
    let created_at = r.timestamp("created_at")?;
    let raw_verdict = r.string("raw_verdict")?;
    if raw_verdict.trim().is_empty() {
        return Err(r.err("empty raw_verdict".into()));
    }
    let user_obj = r.field("user")?.as_object().ok_or_else(|| r.err("field user is not an object".into()))?;
    let u = FieldReader { obj: user_obj, tweet_id: &tweet_id, prefix: "user." };
    let user = UserSnapshot {
        handle: u.string("handle")?,
        display_name: u.opt_string("display_name")?.unwrap_or_default(),
        followers_count: u.count("followers_count")?,
        friends_count: u.count("friends_count")?,
        favorites_count: u.count("favorites_count")?,
        statuses_count: u.count("statuses_count")?,
        verified: u.boolean("verified")?,
        account_created_at: u.timestamp("account_created_at")?,
    };
    if user.handle.trim().is_empty() {
        return Err(r.err("empty user.handle".into()));
    }
    if user.account_created_at > created_at {
        return Err(r.err("user.account_created_at is after created_at".into()));
    }

    Ok(TweetRecord {
        text,
        language: r.opt_string("language")?.unwrap_or_else(|| "en".into()).to_lowercase(),
        created_at,
        hashtags: r.string_list("hashtags")?,
        mentions: r.string_list("mentions")?,
        media_path: r.opt_string("media_path")?.map(PathBuf::from),
        user,
        retweet_count: r.count("retweet_count")?,
        favourite_count: r.count("favourite_count")?,
        retweeted: r.boolean("retweeted")?,
        raw_verdict,
        tweet_id,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub record: TweetRecord,
    pub label: BinaryLabel,
}

/// An ordered, duplicate-free set of labeled records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<LabeledTweet>,
    pub source_manifest: PathBuf,
    pub schema_version: u32,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(misinformation, other)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.records.iter().filter(|r| r.label.is_positive()).count();
        (pos, self.records.len() - pos)
    }

    /// Directory that relative `media_path`s resolve against.
    pub fn base_dir(&self) -> PathBuf {
        self.source_manifest.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn resolve_media(&self, record: &TweetRecord) -> Option<PathBuf> {
        record.media_path.as_ref().map(|p| if p.is_absolute() { p.clone() } else { self.base_dir().join(p) })
    }

    /// SHA-256 over the ordered tweet ids, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(r.record.tweet_id.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Writes the records back out as a manifest. Media paths are rewritten
    /// as absolute paths so the output can live anywhere.
    pub fn write_manifest(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = Vec::new();
        for r in &self.records {
            let mut rec = r.record.clone();
            rec.media_path = self.resolve_media(&rec).map(|p| std::path::absolute(&p).unwrap_or(p));
            let mut v = serde_json::to_value(&rec).expect("record serializes");
            v.as_object_mut().expect("record is an object").insert("schema_version".into(), Value::from(self.schema_version));
            serde_json::to_writer(&mut out, &v).expect("in-memory write");
            out.push(b'\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub tweet_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub rejects: Vec<Reject>,
}

/// Path of the rejects report written beside a manifest.
pub fn rejects_path(manifest_path: &Path) -> PathBuf {
    let mut s = manifest_path.as_os_str().to_os_string();
    s.push(".rejects");
    PathBuf::from(s)
}

/// Loads every parsable record, labels it, and writes the rejects report.
pub fn load_dataset(manifest_path: &Path, aliases: &VerdictAliases) -> Result<LoadOutcome, CorpusError> {
    let src = fs::read_to_string(manifest_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::ManifestNotFound(manifest_path.to_path_buf()),
        _ => CorpusError::Io(e),
    })?;

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                rejects.push(Reject { tweet_id: format!("<line {}>", lineno + 1), reason: format!("invalid JSON: {e}") });
                continue;
            }
        };
        match parse_tweet(&doc) {
            Ok(record) => {
                if !seen.insert(record.tweet_id.clone()) {
                    rejects.push(Reject { tweet_id: record.tweet_id, reason: "duplicate tweet_id".into() });
                    continue;
                }
                let label = binarize_label(normalize_verdict(&record.raw_verdict, aliases));
                records.push(LabeledTweet { record, label });
            }
            Err(CorpusError::MalformedRecord { tweet_id, reason }) => rejects.push(Reject { tweet_id, reason }),
            Err(e) => return Err(e),
        }
    }

    let mut report = fs::File::create(rejects_path(manifest_path))?;
    for r in &rejects {
        let reason = r.reason.replace(['\t', '\n'], " ");
        writeln!(report, "{}\t{}", r.tweet_id, reason)?;
    }

    if records.is_empty() {
        return Err(CorpusError::EmptyDataset(manifest_path.to_path_buf()));
    }
    Ok(LoadOutcome { dataset: Dataset { records, source_manifest: manifest_path.to_path_buf(), schema_version: SCHEMA_VERSION }, rejects })
}

/// Number of records of a class of size `n` that go to the test side:
/// `n * fraction` rounded half-up, kept within `[1, n - 1]`.
pub fn stratum_test_size(n: usize, test_fraction: f64) -> usize {
    let raw = (n as f64 * test_fraction + 0.5 + 1e-9).floor() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Stratified, seed-deterministic split. Both halves keep the original record order.
pub fn split_dataset(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(test_fraction));
    }
    let mut in_test = vec![false; d.records.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in BinaryLabel::ALL {
        let mut idx: Vec<usize> = (0..d.records.len()).filter(|&i| d.records[i].label == label).collect();
        if idx.len() < 2 {
            return Err(CorpusError::InsufficientClassSize { label, count: idx.len() });
        }
        let k = stratum_test_size(idx.len(), test_fraction);
        idx.shuffle(&mut rng);
        for &i in &idx[..k] {
            in_test[i] = true;
        }
    }
    let pick = |want: bool| Dataset {
        records: d.records.iter().zip(&in_test).filter(|(_, &t)| t == want).map(|(r, _)| r.clone()).collect(),
        source_manifest: d.source_manifest.clone(),
        schema_version: d.schema_version,
    };
    Ok((pick(false), pick(true)))
}
