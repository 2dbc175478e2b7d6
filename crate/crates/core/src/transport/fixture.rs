//! Recorded request/response entries.
//!
//! A fixture directory holds one JSON file per recorded exchange. File names
//! are free-form when fixtures are authored by hand; entries written by the
//! cache use `<key>.json`. Lookup always goes through [`cache_key`], so a
//! directory can mix both.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HttpRequest, HttpResponse, Method, TransportError};
use crate::urlnorm;

pub const FIXTURE_SCHEMA: &str = "patchnet.fixture/1";

/// Deterministic key over (method, normalized URL, body hash).
///
/// Components are length-prefixed so distinct tuples never serialize to the
/// same hash input.
pub fn cache_key(method: Method, normalized_url: &str, body_sha256: Option<&str>) -> String {
    let mut hasher = Sha256::new();
    for part in [method.as_str(), normalized_url, body_sha256.unwrap_or("")] {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn body_digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedRequest {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub request: RecordedRequest,
    pub status: u16,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    /// Post-redirect URL, when it differs from the request URL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_base64: Option<String>,
    pub recorded_at: DateTime<Utc>,
    /// Free-form snapshot label, e.g. the date of a data feed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<String>,
}

fn default_schema() -> String {
    FIXTURE_SCHEMA.to_string()
}

impl FixtureEntry {
    pub fn get(url: &str, status: u16, body: impl Into<String>, recorded_at: DateTime<Utc>) -> Self {
        FixtureEntry {
            schema: default_schema(),
            request: RecordedRequest { method: Method::Get, url: url.to_string(), body_sha256: None },
            status,
            headers: BTreeMap::new(),
            final_url: None,
            body: Some(body.into()),
            body_base64: None,
            recorded_at,
            snapshot: None,
        }
    }

    pub fn from_exchange(req: &HttpRequest, resp: &HttpResponse) -> Self {
        let (body, body_base64) = match std::str::from_utf8(&resp.body) {
            Ok(text) => (Some(text.to_string()), None),
            Err(_) => (None, Some(base64::engine::general_purpose::STANDARD.encode(&resp.body))),
        };
        FixtureEntry {
            schema: default_schema(),
            request: RecordedRequest {
                method: req.method,
                url: req.url.clone(),
                body_sha256: req.body.as_deref().map(body_digest),
            },
            status: resp.status,
            headers: resp.headers.clone(),
            final_url: (resp.final_url != req.url).then(|| resp.final_url.clone()),
            body,
            body_base64,
            recorded_at: resp.recorded_at,
            snapshot: resp.snapshot.clone(),
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.insert(name.to_ascii_lowercase(), value.to_string());
        self
    }

    pub fn with_snapshot(mut self, label: &str) -> Self {
        self.snapshot = Some(label.to_string());
        self
    }

    pub fn with_final_url(mut self, url: &str) -> Self {
        self.final_url = Some(url.to_string());
        self
    }

    pub fn key(&self) -> Result<String, TransportError> {
        let url = urlnorm::normalize(&self.request.url)
            .map_err(|e| TransportError::InvalidUrl(e.to_string()))?;
        Ok(cache_key(self.request.method, &url, self.request.body_sha256.as_deref()))
    }

    pub fn body_bytes(&self) -> Result<Vec<u8>, TransportError> {
        if let Some(b64) = &self.body_base64 {
            return base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| TransportError::Fixture(format!("bad base64 body for {}: {e}", self.request.url)));
        }
        Ok(self.body.clone().unwrap_or_default().into_bytes())
    }

    pub fn to_response(&self, origin: super::FetchOrigin) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: self.status,
            headers: self.headers.clone(),
            body: self.body_bytes()?,
            final_url: self.final_url.clone().unwrap_or_else(|| self.request.url.clone()),
            recorded_at: self.recorded_at,
            origin,
            snapshot: self.snapshot.clone(),
        })
    }
}

/// An in-memory index of fixture entries keyed by [`cache_key`].
#[derive(Debug, Clone, Default)]
pub struct FixtureStore {
    entries: BTreeMap<String, FixtureEntry>,
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry, replacing any entry for the same request.
    pub fn insert(&mut self, entry: FixtureEntry) -> Result<(), TransportError> {
        let key = entry.key()?;
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&FixtureEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &FixtureEntry> {
        self.entries.values()
    }

    pub fn merge(&mut self, other: FixtureStore) {
        self.entries.extend(other.entries);
    }

    /// Loads every `*.json` file below `dir`. Two files recording the same
    /// request with different content is an error.
    pub fn load_dir(dir: &Path) -> Result<Self, TransportError> {
        let mut store = FixtureStore::new();
        let mut files = Vec::new();
        collect_json_files(dir, &mut files)?;
        files.sort();
        for path in files {
            let text = fs::read_to_string(&path)
                .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
            let entry: FixtureEntry = serde_json::from_str(&text)
                .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
            let key = entry.key()?;
            if let Some(existing) = store.entries.get(&key) {
                if existing != &entry {
                    return Err(TransportError::Fixture(format!(
                        "{}: conflicting duplicate recording of {}",
                        path.display(),
                        entry.request.url
                    )));
                }
            }
            store.entries.insert(key, entry);
        }
        Ok(store)
    }

    /// Writes every entry as `<key>.json` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), TransportError> {
        fs::create_dir_all(dir).map_err(|e| TransportError::Fixture(format!("{}: {e}", dir.display())))?;
        for (key, entry) in &self.entries {
            write_entry_atomic(&dir.join(format!("{key}.json")), entry)?;
        }
        Ok(())
    }
}

fn collect_json_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), TransportError> {
    let rd = fs::read_dir(dir).map_err(|e| TransportError::Fixture(format!("{}: {e}", dir.display())))?;
    for item in rd {
        let path = item.map_err(|e| TransportError::Fixture(e.to_string()))?.path();
        if path.is_dir() {
            collect_json_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Writes via a temporary sibling and a rename so readers never observe a
/// partially written entry.
pub(crate) fn write_entry_atomic(path: &Path, entry: &FixtureEntry) -> Result<(), TransportError> {
    let text = serde_json::to_string_pretty(entry).map_err(|e| TransportError::Fixture(e.to_string()))?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| TransportError::Fixture(format!("{}: {e}", tmp.display())))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| TransportError::Fixture(e.to_string()))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts() -> DateTime<Utc> {
        DateTime::from_timestamp(1_500_000_000, 0).unwrap()
    }

    #[test]
    fn key_ignores_non_semantic_url_differences() {
        let a = FixtureEntry::get("https://Example.org/a#x", 200, "", ts());
        let b = FixtureEntry::get("https://example.org/a", 200, "", ts());
        assert_eq!(a.key().unwrap(), b.key().unwrap());
    }

    #[test]
    fn dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = FixtureStore::new();
        store.insert(FixtureEntry::get("https://a.org/1", 200, "one", ts())).unwrap();
        store
            .insert(FixtureEntry::get("https://a.org/2", 404, "", ts()).with_header("Content-Type", "text/plain"))
            .unwrap();
        store.write_dir(dir.path()).unwrap();
        let loaded = FixtureStore::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        let key = cache_key(Method::Get, "https://a.org/1", None);
        assert_eq!(loaded.get(&key).unwrap().body.as_deref(), Some("one"));
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = FixtureEntry::get("https://a.org/1", 200, "one", ts());
        let b = FixtureEntry::get("https://a.org/1", 200, "two", ts());
        write_entry_atomic(&dir.path().join("a.json"), &a).unwrap();
        write_entry_atomic(&dir.path().join("b.json"), &b).unwrap();
        assert!(FixtureStore::load_dir(dir.path()).is_err());
    }

    proptest! {
        #[test]
        fn distinct_urls_have_distinct_keys(
            a in "[a-z]{1,6}(/[a-z0-9]{1,4}){0,3}",
            b in "[a-z]{1,6}(/[a-z0-9]{1,4}){0,3}",
        ) {
            let ua = urlnorm::normalize(&format!("https://h.org/{a}")).unwrap();
            let ub = urlnorm::normalize(&format!("https://h.org/{b}")).unwrap();
            let ka = cache_key(Method::Get, &ua, None);
            let kb = cache_key(Method::Get, &ub, None);
            prop_assert_eq!(ua == ub, ka == kb);
        }
    }
}
