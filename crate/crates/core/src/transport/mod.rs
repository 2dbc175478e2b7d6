//! Pluggable HTTP transport: live, cache-then-live, and replay-only.

mod fixture;
mod live;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use fixture::{body_digest, cache_key, FixtureEntry, FixtureStore, RecordedRequest, FIXTURE_SCHEMA};
pub use live::{LiveTransport, RateLimiter};

use crate::urlnorm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    /// Normalized absolute URL.
    pub url: String,
    pub body: Option<Vec<u8>>,
    /// Extra headers. Never part of the cache key.
    pub headers: Vec<(String, String)>,
}

impl HttpRequest {
    pub fn get(url: &str) -> Result<Self, TransportError> {
        let url = urlnorm::normalize(url).map_err(|e| TransportError::InvalidUrl(e.to_string()))?;
        Ok(HttpRequest { method: Method::Get, url, body: None, headers: Vec::new() })
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn key(&self) -> String {
        let digest = self.body.as_deref().map(body_digest);
        cache_key(self.method, &self.url, digest.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchOrigin {
    Live,
    Cache,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased header names; only the recorded subset.
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
    pub final_url: String,
    pub recorded_at: DateTime<Utc>,
    pub origin: FetchOrigin,
    /// Snapshot label carried by recorded entries (e.g. a feed date).
    pub snapshot: Option<String>,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    /// GitHub-style rate limiting: 429, or 403 with an exhausted quota.
    pub fn is_rate_limited(&self) -> bool {
        self.status == 429 || (self.status == 403 && self.header("x-ratelimit-remaining") == Some("0"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("invalid URL: {0}")]
    InvalidUrl(String),
    #[error("no recorded response for {method} {url}")]
    ReplayMiss { method: &'static str, url: String },
    #[error("network error for {url}: {message}")]
    Network { url: String, message: String },
    #[error("fixture error: {0}")]
    Fixture(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    Live,
    #[default]
    CacheThenLive,
    ReplayOnly,
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportMode::Live => "live",
            TransportMode::CacheThenLive => "cache-then-live",
            TransportMode::ReplayOnly => "replay-only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportPolicy {
    pub mode: TransportMode,
    /// Cache directory for `CacheThenLive`, fixture directory for `ReplayOnly`.
    pub cache_dir: Option<PathBuf>,
    /// Requests per minute per host.
    pub rate_limit: u32,
    /// Host to credential. Never serialized.
    #[serde(skip)]
    pub auth_tokens: BTreeMap<String, String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for TransportPolicy {
    fn default() -> Self {
        TransportPolicy {
            mode: TransportMode::CacheThenLive,
            cache_dir: None,
            rate_limit: 60,
            auth_tokens: BTreeMap::new(),
            timeout_secs: 30,
            max_retries: 3,
            backoff_base_ms: 1000,
        }
    }
}

impl TransportPolicy {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        TransportPolicy { mode: TransportMode::ReplayOnly, cache_dir: Some(dir.into()), ..Default::default() }
    }
}

/// Serves only recorded responses; never touches the network.
pub struct ReplayTransport {
    store: FixtureStore,
}

impl ReplayTransport {
    pub fn new(store: FixtureStore) -> Self {
        ReplayTransport { store }
    }
}

impl Transport for ReplayTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        match self.store.get(&req.key()) {
            Some(entry) => entry.to_response(FetchOrigin::Replay),
            None => Err(TransportError::ReplayMiss { method: req.method.as_str(), url: req.url.clone() }),
        }
    }
}

/// Answers from an on-disk cache in fixture format; misses go to the inner
/// transport and are written back.
pub struct CachingTransport<T> {
    dir: PathBuf,
    inner: T,
    write_lock: Mutex<()>,
}

impl<T: Transport> CachingTransport<T> {
    pub fn new(dir: impl Into<PathBuf>, inner: T) -> Self {
        CachingTransport { dir: dir.into(), inner, write_lock: Mutex::new(()) }
    }
}

impl<T: Transport> Transport for CachingTransport<T> {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let path = self.dir.join(format!("{}.json", req.key()));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(entry) = serde_json::from_str::<FixtureEntry>(&text) {
                return entry.to_response(FetchOrigin::Cache);
            }
        }
        let resp = self.inner.send(req)?;
        // Rate-limit and server errors are transient; don't pin them.
        if !resp.is_rate_limited() && resp.status < 500 {
            let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
            std::fs::create_dir_all(&self.dir).map_err(|e| TransportError::Fixture(e.to_string()))?;
            fixture::write_entry_atomic(&path, &FixtureEntry::from_exchange(req, &resp))?;
        }
        Ok(resp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FetchLogEntry {
    pub url: String,
    pub status: Option<u16>,
    pub origin: Option<FetchOrigin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Shared client used by every source adapter. Keeps a log of fetches for
/// report provenance.
#[derive(Clone)]
pub struct HttpClient {
    transport: Arc<dyn Transport>,
    log: Arc<Mutex<Vec<FetchLogEntry>>>,
}

impl HttpClient {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        HttpClient { transport, log: Arc::new(Mutex::new(Vec::new())) }
    }

    /// A client over the same transport with an empty fetch log.
    pub fn fresh(&self) -> Self {
        Self::new(self.transport.clone())
    }

    pub fn replay(store: FixtureStore) -> Self {
        Self::new(Arc::new(ReplayTransport::new(store)))
    }

    pub fn from_policy(policy: &TransportPolicy) -> Result<Self, TransportError> {
        let transport: Arc<dyn Transport> = match policy.mode {
            TransportMode::ReplayOnly => {
                let dir = policy
                    .cache_dir
                    .as_ref()
                    .ok_or_else(|| TransportError::Fixture("replay mode needs a fixture directory".into()))?;
                Arc::new(ReplayTransport::new(FixtureStore::load_dir(dir)?))
            }
            TransportMode::Live => Arc::new(LiveTransport::new(policy)?),
            TransportMode::CacheThenLive => match &policy.cache_dir {
                Some(dir) => Arc::new(CachingTransport::new(dir.clone(), LiveTransport::new(policy)?)),
                None => Arc::new(LiveTransport::new(policy)?),
            },
        };
        Ok(Self::new(transport))
    }

    pub fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let result = self.transport.send(req);
        let entry = match &result {
            Ok(resp) => FetchLogEntry {
                url: req.url.clone(),
                status: Some(resp.status),
                origin: Some(resp.origin),
                error: None,
            },
            Err(e) => FetchLogEntry { url: req.url.clone(), status: None, origin: None, error: Some(e.to_string()) },
        };
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
        result
    }

    pub fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        self.send(&HttpRequest::get(url)?)
    }

    /// Sorted, deduplicated fetch log; independent of request scheduling.
    pub fn fetch_log(&self) -> Vec<FetchLogEntry> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner()).clone();
        log.sort();
        log.dedup();
        log
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }
}

impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient").finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn ts() -> DateTime<Utc> {
        DateTime::from_timestamp(1_500_000_000, 0).unwrap()
    }

    struct Counting(AtomicUsize);

    impl Transport for Counting {
        fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
            let n = self.0.fetch_add(1, Ordering::SeqCst);
            Ok(HttpResponse {
                status: 200,
                headers: BTreeMap::new(),
                body: format!("call {n}").into_bytes(),
                final_url: req.url.clone(),
                recorded_at: ts(),
                origin: FetchOrigin::Live,
                snapshot: None,
            })
        }
    }

    #[test]
    fn replay_miss_is_an_error() {
        let client = HttpClient::replay(FixtureStore::new());
        let err = client.get("https://a.org/x").unwrap_err();
        assert!(matches!(err, TransportError::ReplayMiss { .. }));
        assert_eq!(client.fetch_log()[0].error.as_deref(), Some("no recorded response for GET https://a.org/x"));
    }

    #[test]
    fn replay_is_byte_identical_across_calls() {
        let mut store = FixtureStore::new();
        store.insert(FixtureEntry::get("https://a.org/x", 200, "body", ts())).unwrap();
        let client = HttpClient::replay(store);
        let a = client.get("https://a.org/x").unwrap();
        let b = client.get("https://a.org/x#frag").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.origin, FetchOrigin::Replay);
    }

    #[test]
    fn cache_returns_stored_body() {
        let dir = tempfile::tempdir().unwrap();
        let caching = CachingTransport::new(dir.path(), Counting(AtomicUsize::new(0)));
        let req = HttpRequest::get("https://a.org/x").unwrap();
        let first = caching.send(&req).unwrap();
        let second = caching.send(&req).unwrap();
        assert_eq!(first.origin, FetchOrigin::Live);
        assert_eq!(second.origin, FetchOrigin::Cache);
        assert_eq!(first.body, second.body);
        assert_eq!(caching.inner.0.load(Ordering::SeqCst), 1);
        // the cache directory doubles as a replay fixture
        let replay = HttpClient::replay(FixtureStore::load_dir(dir.path()).unwrap());
        assert_eq!(replay.get("https://a.org/x").unwrap().body, first.body);
    }
}
