//! Synthetic upstreams for tests, fixture recording and demos.
//!
//! [`World`] answers the same HTTP requests the source adapters send (NVD
//! feeds, the Debian list, Bugzilla, the GitHub REST API and plain pages)
//! from an in-memory model. Wrapping it in a caching transport records a
//! fixture directory that replays offline.

mod corpus;
pub mod worked_example;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde_json::json;
use sha2::{Digest, Sha256};
use url::Url;

pub use corpus::{corpus_truth, corpus_world, CORPUS_CVES, SVN_REVISION};
pub use worked_example::{worked_example_world, WorkedExample};

use crate::cve::CveId;
use crate::report::{run_trace, RunConfig, TraceError, TraceReport};
use crate::sources::{CommitRef, Sources};
use crate::transport::{CachingTransport, FetchOrigin, HttpClient, HttpRequest, HttpResponse, Transport, TransportError};

pub const WORLD_SNAPSHOT: &str = "synthetic-2024-01-01";
pub const GITHUB_PAGE: usize = 100;
const SEARCH_WINDOW: usize = 1000;

/// A 40-hex commit id that starts with `prefix`.
pub fn sha(prefix: &str) -> String {
    let digest = hex::encode(Sha256::digest(prefix.as_bytes()));
    let mut s = prefix.to_ascii_lowercase();
    s.push_str(&digest);
    s.truncate(40);
    s
}

pub fn ts(rfc3339: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(rfc3339).expect("valid timestamp").with_timezone(&Utc)
}

pub fn recorded_at() -> DateTime<Utc> {
    ts("2024-01-01T00:00:00Z")
}

#[derive(Debug, Clone)]
pub struct SyntheticCommit {
    pub owner: String,
    pub repo: String,
    pub sha: String,
    pub message: String,
    pub paths: Vec<String>,
    pub committed_at: DateTime<Utc>,
    pub parents: usize,
}

impl SyntheticCommit {
    pub fn new(owner: &str, repo: &str, sha: &str, message: &str, paths: &[&str], committed_at: &str) -> Self {
        SyntheticCommit {
            owner: owner.to_lowercase(),
            repo: repo.to_lowercase(),
            sha: sha.to_string(),
            message: message.to_string(),
            paths: paths.iter().map(|p| p.to_string()).collect(),
            committed_at: ts(committed_at),
            parents: 1,
        }
    }

    pub fn url(&self) -> String {
        CommitRef::github(&self.owner, &self.repo, &self.sha).url
    }

    fn api_body(&self) -> serde_json::Value {
        json!({
            "message": self.message,
            "committer": {"date": self.committed_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)},
            "author": {"date": self.committed_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)},
        })
    }
}

#[derive(Debug, Clone, Default)]
struct Repo {
    default_branch: String,
    branches: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, Default)]
struct NvdRecord {
    references: Vec<String>,
    cpes: Vec<String>,
    description: String,
}

/// In-memory model of every upstream.
#[derive(Debug, Clone, Default)]
pub struct World {
    nvd: BTreeMap<String, NvdRecord>,
    debian: BTreeMap<String, Vec<String>>,
    redhat: BTreeMap<String, Vec<(u64, Vec<String>)>>,
    pages: BTreeMap<String, (String, String)>,
    commits: BTreeMap<(String, String, String), SyntheticCommit>,
    repos: BTreeMap<(String, String), Repo>,
    extra_search: BTreeMap<String, Vec<SyntheticCommit>>,
    failing: BTreeSet<String>,
}

fn norm(url: &str) -> String {
    crate::urlnorm::normalize(url).unwrap_or_else(|_| url.to_string())
}

impl World {
    pub fn new() -> Self {
        World::default()
    }

    pub fn nvd(&mut self, cve: &str, references: &[&str], cpes: &[&str]) -> &mut Self {
        self.nvd.insert(
            cve.to_string(),
            NvdRecord {
                references: references.iter().map(|s| s.to_string()).collect(),
                cpes: cpes.iter().map(|s| s.to_string()).collect(),
                description: format!("Synthetic description of {cve}."),
            },
        );
        self
    }

    pub fn debian(&mut self, cve: &str, notes: &[&str]) -> &mut Self {
        self.debian.insert(cve.to_string(), notes.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn redhat(&mut self, cve: &str, bugs: &[(u64, &[&str])]) -> &mut Self {
        self.redhat.insert(
            cve.to_string(),
            bugs.iter().map(|(id, cs)| (*id, cs.iter().map(|s| s.to_string()).collect())).collect(),
        );
        self
    }

    /// A page served at `url` (normalized).
    pub fn page(&mut self, url: &str, html: &str) -> &mut Self {
        self.pages.insert(norm(url), (norm(url), html.to_string()));
        self
    }

    /// A page that redirects: requested at `url`, served from `final_url`.
    pub fn redirect_page(&mut self, url: &str, final_url: &str, html: &str) -> &mut Self {
        self.pages.insert(norm(url), (norm(final_url), html.to_string()));
        self
    }

    pub fn repo(&mut self, owner: &str, repo: &str, default_branch: &str) -> &mut Self {
        let r = self.repos.entry((owner.to_lowercase(), repo.to_lowercase())).or_default();
        r.default_branch = default_branch.to_string();
        r.branches.entry(default_branch.to_string()).or_default();
        self
    }

    /// Adds a commit and places it on `branches`.
    pub fn commit(&mut self, commit: SyntheticCommit, branches: &[&str]) -> String {
        let key = (commit.owner.clone(), commit.repo.clone());
        let repo = self.repos.entry(key).or_default();
        if repo.default_branch.is_empty() {
            repo.default_branch = "master".into();
        }
        for b in branches {
            repo.branches.entry(b.to_string()).or_default().insert(commit.sha.clone());
        }
        let url = commit.url();
        self.commits.insert((commit.owner.clone(), commit.repo.clone(), commit.sha.clone()), commit);
        url
    }

    pub fn branch(&mut self, owner: &str, repo: &str, branch: &str) -> &mut Self {
        self.repos
            .entry((owner.to_lowercase(), repo.to_lowercase()))
            .or_default()
            .branches
            .entry(branch.to_string())
            .or_default();
        self
    }

    /// Search hits returned for `query` before the indexed ones.
    pub fn extra_search_hits(&mut self, query: &str, hits: Vec<SyntheticCommit>) -> &mut Self {
        self.extra_search.entry(query.to_string()).or_default().extend(hits);
        self
    }

    /// Requests to `url` answer 500.
    pub fn fail(&mut self, url: &str) -> &mut Self {
        self.failing.insert(norm(url));
        self
    }

    pub fn into_transport(self) -> Arc<dyn Transport> {
        Arc::new(self)
    }

    pub fn client(&self) -> HttpClient {
        HttpClient::new(Arc::new(self.clone()))
    }

    pub fn sources(&self) -> Sources {
        Sources::new(self.client())
    }

    /// Sources whose every exchange is also written to `dir` in fixture
    /// format, so the same requests replay offline later.
    pub fn recording_sources(&self, dir: &Path) -> Sources {
        let caching = CachingTransport::new(dir, self.clone());
        Sources::new(HttpClient::new(Arc::new(caching)))
    }

    pub fn record(&self, cve: &CveId, config: &RunConfig, dir: &Path) -> Result<TraceReport, TraceError> {
        run_trace(cve, config, &self.recording_sources(dir))
    }

    fn respond(&self, status: u16, body: Vec<u8>, final_url: &str) -> HttpResponse {
        let mut headers = BTreeMap::new();
        headers.insert("content-type".to_string(), "text/plain".to_string());
        HttpResponse {
            status,
            headers,
            body,
            final_url: final_url.to_string(),
            recorded_at: recorded_at(),
            origin: FetchOrigin::Live,
            snapshot: None,
        }
    }

    fn json(&self, value: serde_json::Value, url: &str) -> HttpResponse {
        let mut r = self.respond(200, serde_json::to_vec_pretty(&value).expect("json"), url);
        r.headers.insert("content-type".into(), "application/json".into());
        r
    }

    fn nvd_feed(&self, year: &str) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .nvd
            .iter()
            .filter(|(id, _)| id.split('-').nth(1) == Some(year))
            .map(|(id, rec)| {
                json!({
                    "cve": {
                        "CVE_data_meta": {"ID": id},
                        "references": {"reference_data": rec.references.iter().map(|u| json!({"url": u, "tags": []})).collect::<Vec<_>>()},
                        "description": {"description_data": [{"lang": "en", "value": rec.description}]},
                    },
                    "configurations": {"nodes": [{"operator": "OR", "children": [], "cpe_match": rec.cpes.iter().map(|c| json!({"vulnerable": true, "cpe23Uri": c})).collect::<Vec<_>>()}]},
                })
            })
            .collect();
        json!({"CVE_data_type": "CVE", "CVE_data_format": "MITRE", "CVE_data_version": "4.0", "CVE_Items": items})
    }

    fn debian_list(&self) -> String {
        let mut out = String::new();
        for (cve, notes) in self.debian.iter().rev() {
            out.push_str(&format!("{cve} (synthetic entry)\n\t- somepkg <unfixed>\n"));
            for n in notes {
                out.push_str(&format!("\tNOTE: {n}\n"));
            }
        }
        out
    }

    fn search(&self, query: &str) -> Vec<&SyntheticCommit> {
        let q = query.to_lowercase();
        let mut hits: Vec<&SyntheticCommit> = self.extra_search.get(query).map(|v| v.iter().collect()).unwrap_or_default();
        // Commit search only indexes default branches.
        for ((owner, repo), r) in &self.repos {
            let Some(shas) = r.branches.get(&r.default_branch) else { continue };
            for sha in shas {
                let c = &self.commits[&(owner.clone(), repo.clone(), sha.clone())];
                if c.message.to_lowercase().contains(&q) {
                    hits.push(c);
                }
            }
        }
        hits
    }

    fn github(&self, url: &Url) -> HttpResponse {
        let full = url.as_str();
        let q: BTreeMap<String, String> = url.query_pairs().map(|(k, v)| (k.into_owned(), v.into_owned())).collect();
        let page: usize = q.get("page").and_then(|p| p.parse().ok()).unwrap_or(1).max(1);
        let per_page: usize = q.get("per_page").and_then(|p| p.parse().ok()).unwrap_or(30);
        let segs: Vec<&str> = url.path_segments().map(|s| s.collect()).unwrap_or_default();
        let slice = |n: usize| ((page - 1) * per_page).min(n)..(page * per_page).min(n);
        match segs.as_slice() {
            ["search", "commits"] => {
                if page * per_page > SEARCH_WINDOW {
                    return self.respond(422, b"{\"message\":\"Only the first 1000 search results are available\"}".to_vec(), full);
                }
                let hits = self.search(q.get("q").map(String::as_str).unwrap_or_default());
                let items: Vec<serde_json::Value> = hits[slice(hits.len())]
                    .iter()
                    .map(|c| {
                        json!({
                            "sha": c.sha,
                            "commit": c.api_body(),
                            "repository": {"name": c.repo, "owner": {"login": c.owner}},
                        })
                    })
                    .collect();
                self.json(json!({"total_count": hits.len(), "incomplete_results": false, "items": items}), full)
            }
            ["repos", owner, repo, "branches"] => match self.repos.get(&(owner.to_string(), repo.to_string())) {
                Some(r) => {
                    let names: Vec<&String> = r.branches.keys().collect();
                    let body: Vec<serde_json::Value> =
                        names[slice(names.len())].iter().map(|n| json!({"name": n, "protected": false})).collect();
                    self.json(json!(body), full)
                }
                None => self.respond(404, b"{\"message\":\"Not Found\"}".to_vec(), full),
            },
            ["repos", owner, repo, "commits"] => {
                let Some(r) = self.repos.get(&(owner.to_string(), repo.to_string())) else {
                    return self.respond(404, b"{\"message\":\"Not Found\"}".to_vec(), full);
                };
                let branch = q.get("sha").cloned().unwrap_or_else(|| r.default_branch.clone());
                let Some(shas) = r.branches.get(&branch) else {
                    return self.respond(404, b"{\"message\":\"No commit found for SHA\"}".to_vec(), full);
                };
                let since = q.get("since").map(|s| ts(s));
                let until = q.get("until").map(|s| ts(s));
                let mut listed: Vec<&SyntheticCommit> = shas
                    .iter()
                    .map(|s| &self.commits[&(owner.to_string(), repo.to_string(), s.clone())])
                    .filter(|c| since.is_none_or(|t| c.committed_at >= t) && until.is_none_or(|t| c.committed_at <= t))
                    .collect();
                listed.sort_by(|a, b| b.committed_at.cmp(&a.committed_at).then(a.sha.cmp(&b.sha)));
                let body: Vec<serde_json::Value> = listed[slice(listed.len())]
                    .iter()
                    .map(|c| json!({"sha": c.sha, "commit": c.api_body(), "parents": vec![json!({}); c.parents]}))
                    .collect();
                self.json(json!(body), full)
            }
            ["repos", owner, repo, "commits", sha] => {
                let found = self
                    .commits
                    .values()
                    .find(|c| c.owner == *owner && c.repo == *repo && c.sha.starts_with(&sha.to_lowercase()));
                match found {
                    Some(c) => self.json(
                        json!({
                            "sha": c.sha,
                            "commit": c.api_body(),
                            "parents": vec![json!({}); c.parents],
                            "files": c.paths.iter().map(|p| json!({"filename": p, "status": "modified"})).collect::<Vec<_>>(),
                        }),
                        full,
                    ),
                    None => self.respond(422, b"{\"message\":\"No commit found for SHA\"}".to_vec(), full),
                }
            }
            _ => self.respond(404, Vec::new(), full),
        }
    }
}

impl Transport for World {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let url = Url::parse(&req.url).map_err(|_| TransportError::InvalidUrl(req.url.clone()))?;
        if self.failing.contains(&req.url) {
            return Ok(self.respond(500, b"synthetic failure".to_vec(), &req.url));
        }
        let host = url.host_str().unwrap_or_default();
        let path = url.path();
        let resp = match host {
            "nvd.nist.gov" => {
                let year = path.rsplit('-').next().unwrap_or_default().split('.').next().unwrap_or_default();
                let mut r = self.json(self.nvd_feed(year), &req.url);
                r.snapshot = Some(WORLD_SNAPSHOT.to_string());
                r
            }
            "salsa.debian.org" => self.respond(200, self.debian_list().into_bytes(), &req.url),
            "bugzilla.redhat.com" => {
                let segs: Vec<&str> = url.path_segments().map(|s| s.collect()).unwrap_or_default();
                match segs.as_slice() {
                    ["rest", "bug"] => {
                        let alias = url.query_pairs().find(|(k, _)| k == "alias").map(|(_, v)| v.into_owned());
                        let bugs: Vec<serde_json::Value> = alias
                            .and_then(|a| self.redhat.get(&a))
                            .map(|bs| bs.iter().map(|(id, _)| json!({"id": id})).collect())
                            .unwrap_or_default();
                        self.json(json!({"bugs": bugs, "faults": []}), &req.url)
                    }
                    ["rest", "bug", id, "comment"] => {
                        let id: u64 = id.parse().unwrap_or_default();
                        let comments: Vec<serde_json::Value> = self
                            .redhat
                            .values()
                            .flatten()
                            .find(|(b, _)| *b == id)
                            .map(|(_, cs)| cs.iter().enumerate().map(|(i, c)| json!({"count": i, "text": c})).collect())
                            .unwrap_or_default();
                        self.json(json!({"bugs": {id.to_string(): {"comments": comments}}, "comments": {}}), &req.url)
                    }
                    _ => self.respond(404, Vec::new(), &req.url),
                }
            }
            "api.github.com" => self.github(&url),
            _ => match self.pages.get(&req.url) {
                Some((final_url, body)) => {
                    let mut r = self.respond(200, body.clone().into_bytes(), final_url);
                    r.headers.insert("content-type".into(), "text/html".into());
                    r
                }
                None => self.respond(404, b"not found".to_vec(), &req.url),
            },
        };
        Ok(resp)
    }
}

/// Delays every request by a pseudo-random amount derived from the URL and a
/// seed, so concurrent fetches complete in a scrambled order.
pub struct JitterTransport<T> {
    inner: T,
    seed: u64,
    max_micros: u64,
}

impl<T: Transport> JitterTransport<T> {
    pub fn new(inner: T, seed: u64, max_micros: u64) -> Self {
        JitterTransport { inner, seed, max_micros: max_micros.max(1) }
    }
}

impl<T: Transport> Transport for JitterTransport<T> {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(req.url.as_bytes());
        let d = h.finalize();
        let n = u64::from_le_bytes(d[..8].try_into().expect("8 bytes"));
        std::thread::sleep(Duration::from_micros(n % self.max_micros));
        self.inner.send(req)
    }
}
