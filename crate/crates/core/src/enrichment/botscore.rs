//! Cached client for an external bot-score service.
//!
//! Scores live in `[0, 5]`. The cache is an append-only file of
//! `handle<TAB>score<TAB>fetched_at` lines (score `NA` records a handle the
//! service does not know); later lines win on reload.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use log::warn;
use serde::Deserialize;

use super::EnrichmentError;

/// Environment variable holding the service credential.
pub const API_KEY_ENV: &str = "BOT_SCORE_API_KEY";

pub const MAX_SCORE: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("service unreachable: {0}")]
    Unreachable(String),
    #[error("bad response: {0}")]
    BadResponse(String),
}

/// One request against the scoring service. `Ok(None)` means the service
/// answered but has no score for the handle.
pub trait ScoreTransport: Send + Sync {
    fn request(&self, handle: &str) -> Result<Option<f64>, TransportError>;
}

/// HTTP transport: `GET <endpoint>?handle=<handle>` with a bearer credential,
/// expecting `{"score": <number|null>}`; HTTP 404 means unknown handle.
pub struct HttpScoreTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    credential: String,
}

impl HttpScoreTransport {
    pub fn new(endpoint: &str, credential: &str, timeout: Duration) -> Result<Self, EnrichmentError> {
        reqwest::Url::parse(endpoint).map_err(|e| EnrichmentError::Config(format!("bot-score endpoint: {e}")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EnrichmentError::Config(format!("http client: {e}")))?;
        Ok(Self { client, endpoint: endpoint.to_string(), credential: credential.to_string() })
    }

    /// Reads the credential from [`API_KEY_ENV`].
    pub fn from_env(endpoint: &str, timeout: Duration) -> Result<Self, EnrichmentError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| EnrichmentError::Config(format!("{API_KEY_ENV} is not set")))?;
        Self::new(endpoint, &key, timeout)
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: Option<f64>,
}

impl ScoreTransport for HttpScoreTransport {
    fn request(&self, handle: &str) -> Result<Option<f64>, TransportError> {
        let url = reqwest::Url::parse_with_params(&self.endpoint, &[("handle", handle)])
            .map_err(|e| TransportError::BadResponse(e.to_string()))?;
        let resp = self.client.get(url).bearer_auth(&self.credential).send().map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if resp.status() == reqwest::StatusCode::NOT_FOUND {
            return Ok(None);
        }
        if !resp.status().is_success() {
            return Err(TransportError::BadResponse(format!("HTTP {}", resp.status())));
        }
        let body: ScoreResponse = resp.json().map_err(|e| TransportError::BadResponse(e.to_string()))?;
        Ok(body.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CacheEntry {
    score: Option<f64>,
    fetched_at: DateTime<Utc>,
}

/// Enforces a minimum interval between outgoing requests.
struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

pub struct BotScoreClient {
    transport: Box<dyn ScoreTransport>,
    ttl: chrono::Duration,
    cache: RwLock<HashMap<String, CacheEntry>>,
    cache_file: Option<PathBuf>,
    write_lock: Mutex<()>,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    limiter: RateLimiter,
    network_calls: AtomicUsize,
}

impl BotScoreClient {
    pub const DEFAULT_TTL_DAYS: i64 = 30;

    /// In-memory cache, default TTL, no rate cap.
    pub fn new(transport: Box<dyn ScoreTransport>) -> Self {
        Self {
            transport,
            ttl: chrono::Duration::days(Self::DEFAULT_TTL_DAYS),
            cache: RwLock::new(HashMap::new()),
            cache_file: None,
            write_lock: Mutex::new(()),
            in_flight: Mutex::new(HashMap::new()),
            limiter: RateLimiter { min_interval: Duration::ZERO, last: Mutex::new(None) },
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_ttl(mut self, ttl: chrono::Duration) -> Self {
        self.ttl = ttl;
        self
    }

    /// Caps outgoing requests at `per_second` (0 disables the cap).
    pub fn with_rate_cap(mut self, per_second: f64) -> Self {
        self.limiter.min_interval = if per_second > 0.0 { Duration::from_secs_f64(1.0 / per_second) } else { Duration::ZERO };
        self
    }

    /// Loads an existing cache file (if any) and appends new entries to it.
    pub fn with_cache_file(mut self, path: &Path) -> Result<Self, EnrichmentError> {
        if path.exists() {
            let entries = parse_cache(&fs::read_to_string(path)?)?;
            self.cache.get_mut().unwrap().extend(entries);
        }
        self.cache_file = Some(path.to_path_buf());
        Ok(self)
    }

    /// Number of requests issued to the transport so far.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    fn fresh(&self, handle: &str, now: DateTime<Utc>) -> Option<CacheEntry> {
        let cache = self.cache.read().unwrap();
        cache.get(handle).copied().filter(|e| now - e.fetched_at < self.ttl)
    }

    fn store(&self, handle: &str, entry: CacheEntry) {
        let _guard = self.write_lock.lock().unwrap();
        self.cache.write().unwrap().insert(handle.to_string(), entry);
        if let Some(path) = &self.cache_file {
            let score = entry.score.map_or_else(|| "NA".to_string(), |s| s.to_string());
            let line = format!("{handle}\t{score}\t{}\n", entry.fetched_at.to_rfc3339());
            let res = OpenOptions::new().create(true).append(true).open(path).and_then(|mut f| f.write_all(line.as_bytes()));
            if let Err(e) = res {
                warn!("bot-score cache write failed for {handle}: {e}");
            }
        }
    }

    /// Score for `handle` as of `now`. See [`fetch_bot_score`].
    pub fn fetch_at(&self, handle: &str, now: DateTime<Utc>) -> Option<f64> {
        if handle.trim().is_empty() {
            return None;
        }
        if let Some(e) = self.fresh(handle, now) {
            return e.score;
        }
        // One request per handle at a time; a concurrent caller waits and then hits the cache.
        let slot = self.in_flight.lock().unwrap().entry(handle.to_string()).or_default().clone();
        let _held = slot.lock().unwrap();
        if let Some(e) = self.fresh(handle, now) {
            return e.score;
        }

        self.limiter.wait();
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        match self.transport.request(handle) {
            Ok(Some(score)) if (0.0..=MAX_SCORE).contains(&score) => {
                self.store(handle, CacheEntry { score: Some(score), fetched_at: now });
                Some(score)
            }
            Ok(Some(score)) => {
                warn!("bot score for {handle} out of range [0, {MAX_SCORE}]: {score}");
                None
            }
            Ok(None) => {
                self.store(handle, CacheEntry { score: None, fetched_at: now });
                None
            }
            Err(e) => {
                warn!("bot score lookup failed for {handle}: {e}");
                None
            }
        }
    }
}

fn parse_cache(src: &str) -> Result<HashMap<String, CacheEntry>, EnrichmentError> {
    let mut out = HashMap::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| EnrichmentError::BadCache { line: i + 1, reason: reason.to_string() };
        let mut parts = line.split('\t');
        let (Some(handle), Some(score), Some(at)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected handle<TAB>score<TAB>fetched_at"));
        };
        let score = match score {
            "NA" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("score is not a number"))?),
        };
        let fetched_at = DateTime::parse_from_rfc3339(at).map_err(|_| bad("bad fetched_at"))?.with_timezone(&Utc);
        out.insert(handle.to_string(), CacheEntry { score, fetched_at });
    }
    Ok(out)
}

/// Cached score when fresh, otherwise one request. Every failure mode
/// (unreachable service, unknown handle, out-of-range score) yields `None`.
pub fn fetch_bot_score(handle: &str, client: &BotScoreClient) -> Option<f64> {
    client.fetch_at(handle, Utc::now())
}


#[cfg(test)]
mod tests {
    use super::testing::StubTransport;
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 9, 30, 0, 0, 0).unwrap()
    }

    #[test]
    fn cache_hit_makes_no_call() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bot.cache");
        fs::write(&path, format!("alice\t4.2\t{}\n", t0().to_rfc3339())).unwrap();
        let stub = StubTransport::new(&[]);
        let calls = stub.calls.clone();
        let client = BotScoreClient::new(Box::new(stub)).with_cache_file(&path).unwrap();
        assert_eq!(client.fetch_at("alice", t0() + chrono::Duration::days(1)), Some(4.2));
        assert_eq!(calls.load(Ordering::SeqCst), 0);
        assert_eq!(client.network_calls(), 0);
    }

    #[test]
    fn out_of_range_is_absent() {
        let client = BotScoreClient::new(Box::new(StubTransport::new(&[("bob", 6.1)])));
        assert_eq!(client.fetch_at("bob", t0()), None);
    }

    #[test]
    fn unreachable_is_absent() {
        let mut stub = StubTransport::new(&[("bob", 1.0)]);
        stub.unreachable = true;
        let client = BotScoreClient::new(Box::new(stub));
        assert_eq!(client.fetch_at("bob", t0()), None);
        assert_eq!(client.network_calls(), 1);
    }

    #[test]
    fn one_request_per_ttl_window() {
        let stub = StubTransport::new(&[("carol", 2.5)]);
        let calls = stub.calls.clone();
        let client = BotScoreClient::new(Box::new(stub)).with_ttl(chrono::Duration::days(30));
        for d in 0..30 {
            assert_eq!(client.fetch_at("carol", t0() + chrono::Duration::days(d)), Some(2.5));
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        client.fetch_at("carol", t0() + chrono::Duration::days(30));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn unknown_handle_is_cached_as_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bot.cache");
        let client = BotScoreClient::new(Box::new(StubTransport::new(&[("dan", 0.5)]))).with_cache_file(&path).unwrap();
        assert_eq!(client.fetch_at("ghost", t0()), None);
        assert_eq!(client.fetch_at("dan", t0()), Some(0.5));

        let stub = StubTransport::new(&[]);
        let calls = stub.calls.clone();
        let warm = BotScoreClient::new(Box::new(stub)).with_cache_file(&path).unwrap();
        assert_eq!(warm.fetch_at("ghost", t0()), None);
        assert_eq!(warm.fetch_at("dan", t0()), Some(0.5));
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn concurrent_fetches_share_one_request() {
        let stub = StubTransport::new(&[("erin", 3.0)]);
        let calls = stub.calls.clone();
        let client = BotScoreClient::new(Box::new(stub));
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| assert_eq!(client.fetch_at("erin", t0()), Some(3.0)));
            }
        });
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn corrupt_cache_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bot.cache");
        fs::write(&path, "alice\tnope\n").unwrap();
        assert!(BotScoreClient::new(Box::new(StubTransport::new(&[]))).with_cache_file(&path).is_err());
    }
}
