//! Advisory and repository data sources: NVD yearly feeds, the Debian
//! security tracker, Red Hat Bugzilla, and the GitHub REST API.

mod debian;
mod github;
mod nvd;
mod redhat;
mod svn;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use github::SearchHit;

use crate::cve::CveId;
use crate::transport::{HttpClient, HttpResponse, TransportError};
use crate::urlnorm;

/// Result cap of the GitHub commit search API.
pub const SEARCH_RESULT_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceId {
    #[serde(rename = "nvd")]
    Nvd,
    #[serde(rename = "debian")]
    Debian,
    #[serde(rename = "redhat")]
    RedHat,
    #[serde(rename = "github")]
    GitHub,
}

impl SourceId {
    pub const ALL: [SourceId; 4] = [SourceId::Nvd, SourceId::Debian, SourceId::RedHat, SourceId::GitHub];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceId::Nvd => "nvd",
            SourceId::Debian => "debian",
            SourceId::RedHat => "redhat",
            SourceId::GitHub => "github",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            SourceId::Nvd => "NVD",
            SourceId::Debian => "Debian",
            SourceId::RedHat => "Red Hat",
            SourceId::GitHub => "GitHub",
        }
    }

    /// Paths from NVD and GitHub get a one-step length discount, and direct
    /// patch children of these sources are high-confidence.
    pub fn is_high_confidence(self) -> bool {
        matches!(self, SourceId::Nvd | SourceId::GitHub)
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nvd" => Ok(SourceId::Nvd),
            "debian" => Ok(SourceId::Debian),
            "redhat" | "red-hat" | "red_hat" => Ok(SourceId::RedHat),
            "github" => Ok(SourceId::GitHub),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Field holding the reference-bearing text for each explicit source.
pub fn reference_field(source: SourceId) -> &'static str {
    match source {
        SourceId::Nvd => "references",
        SourceId::Debian => "Notes",
        SourceId::RedHat => "comments",
        SourceId::GitHub => "commits",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisoryDocument {
    pub source: SourceId,
    pub cve_id: CveId,
    pub raw_fields: BTreeMap<String, String>,
    pub fetched_at: DateTime<Utc>,
}

impl AdvisoryDocument {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.raw_fields.get(name).map(String::as_str)
    }

    /// URLs mentioned in the source's reference field, normalized and
    /// deduplicated in first-occurrence order.
    pub fn reference_urls(&self) -> Vec<String> {
        let text = self.field(reference_field(self.source)).unwrap_or_default();
        crate::extract::extract_urls(text, "")
            .into_iter()
            .map(|r| r.url)
            .collect()
    }

    /// CPE vendor/product pairs (NVD only).
    pub fn cpes(&self) -> Vec<CpeEntry> {
        self.field("cpes")
            .unwrap_or_default()
            .lines()
            .filter_map(CpeEntry::from_cpe23)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CpeEntry {
    pub vendor: String,
    pub product: String,
}

impl CpeEntry {
    pub fn new(vendor: &str, product: &str) -> Option<Self> {
        let vendor = vendor.trim().to_lowercase();
        let product = product.trim().to_lowercase();
        if vendor.is_empty() || product.is_empty() || vendor == "*" || product == "*" {
            return None;
        }
        Some(CpeEntry { vendor, product })
    }

    /// Parses `cpe:2.3:part:vendor:product:...`, honoring `\` escapes.
    pub fn from_cpe23(uri: &str) -> Option<Self> {
        let mut fields = Vec::new();
        let mut cur = String::new();
        let mut chars = uri.trim().chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => {
                    if let Some(n) = chars.next() {
                        cur.push(n);
                    }
                }
                ':' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
        fields.push(cur);
        if fields.len() < 5 || fields[0] != "cpe" || fields[1] != "2.3" {
            return None;
        }
        CpeEntry::new(&fields[3], &fields[4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Platform {
    GitHubCommit,
    SvnCommit,
    OtherGitCommit,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommitRef {
    pub platform: Platform,
    pub url: String,
    #[serde(default)]
    pub owner: String,
    #[serde(default)]
    pub repo: String,
    pub commit_id: String,
}

impl CommitRef {
    pub fn github(owner: &str, repo: &str, sha: &str) -> Self {
        let (owner, repo, sha) = (owner.to_lowercase(), repo.to_lowercase(), sha.to_lowercase());
        CommitRef {
            platform: Platform::GitHubCommit,
            url: format!("https://github.com/{owner}/{repo}/commit/{sha}"),
            owner,
            repo,
            commit_id: sha,
        }
    }

    /// `owner/repo@abcdef0` style label.
    pub fn short_label(&self) -> String {
        let short: String = self.commit_id.chars().take(7).collect();
        if self.repo.is_empty() {
            format!("r{}", self.commit_id.trim_start_matches('r'))
        } else {
            format!("{}@{}", self.repo, short)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitDetail {
    #[serde(rename = "ref")]
    pub commit: CommitRef,
    pub message: String,
    pub changed_paths: Vec<String>,
    /// Committer date; expansion windows are anchored on it.
    pub committed_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authored_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_hint: Option<String>,
    #[serde(default)]
    pub is_merge: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("unexpected HTTP status {status} for {url}")]
    Http { url: String, status: u16 },
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },
    #[error("unsupported commit platform for {0}")]
    UnsupportedPlatform(String),
}

impl SourceError {
    pub(crate) fn parse(what: impl Into<String>, message: impl fmt::Display) -> Self {
        SourceError::Parse { what: what.into(), message: message.to_string() }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, SourceError::RateLimited(_))
    }
}

/// Base URLs of each upstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    /// `{year}` is replaced by the CVE year.
    pub nvd_feed: String,
    pub debian_list: String,
    pub redhat_bugzilla: String,
    pub github_api: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            nvd_feed: "https://nvd.nist.gov/feeds/json/cve/1.1/nvdcve-1.1-{year}.json.gz".into(),
            debian_list: "https://salsa.debian.org/security-tracker-team/security-tracker/-/raw/master/data/CVE/list"
                .into(),
            redhat_bugzilla: "https://bugzilla.redhat.com/rest".into(),
            github_api: "https://api.github.com".into(),
        }
    }
}

/// A fetched web page (issue tracker or hybrid reference).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub final_url: String,
    pub body: String,
}

type Shared<T> = Arc<OnceLock<Result<Arc<T>, SourceError>>>;

/// Entry point for every upstream fetch. Cheap to share across threads;
/// large documents (yearly feeds, the tracker list) are parsed once.
pub struct Sources {
    http: HttpClient,
    endpoints: Endpoints,
    nvd_feeds: Mutex<HashMap<u16, Shared<nvd::NvdFeed>>>,
    debian_list: Shared<debian::DebianList>,
}

impl Sources {
    pub fn new(http: HttpClient) -> Self {
        Self::with_endpoints(http, Endpoints::default())
    }

    pub fn with_endpoints(http: HttpClient, endpoints: Endpoints) -> Self {
        Sources {
            http,
            endpoints,
            nvd_feeds: Mutex::new(HashMap::new()),
            debian_list: Arc::new(OnceLock::new()),
        }
    }

    pub fn http(&self) -> &HttpClient {
        &self.http
    }

    pub fn endpoints(&self) -> &Endpoints {
        &self.endpoints
    }

    pub fn fetch_nvd_advisory(&self, cve: &CveId) -> Result<AdvisoryDocument, SourceError> {
        let cell = {
            let mut feeds = self.nvd_feeds.lock().unwrap_or_else(|e| e.into_inner());
            feeds.entry(cve.year()).or_default().clone()
        };
        let feed = cell.get_or_init(|| nvd::load_feed(self, cve.year()).map(Arc::new)).clone()?;
        feed.advisory(cve)
    }

    pub fn fetch_debian_advisory(&self, cve: &CveId) -> Result<Option<AdvisoryDocument>, SourceError> {
        let list = self
            .debian_list
            .get_or_init(|| debian::load_list(self).map(Arc::new))
            .clone()?;
        Ok(list.advisory(cve))
    }

    pub fn fetch_redhat_advisory(&self, cve: &CveId) -> Result<Option<AdvisoryDocument>, SourceError> {
        redhat::fetch(self, cve)
    }

    pub fn search_github_commits(&self, query: &str) -> Result<Vec<SearchHit>, SourceError> {
        github::search_commits(self, query)
    }

    pub fn fetch_commit(&self, commit: &CommitRef) -> Result<CommitDetail, SourceError> {
        match commit.platform {
            Platform::GitHubCommit => github::fetch_commit(self, commit),
            Platform::SvnCommit => svn::fetch_commit(self, commit),
            Platform::OtherGitCommit => Err(SourceError::UnsupportedPlatform(commit.url.clone())),
        }
    }

    pub fn list_branches(&self, owner: &str, repo: &str) -> Result<Vec<String>, SourceError> {
        github::list_branches(self, owner, repo)
    }

    pub fn list_commits_in_window(
        &self,
        owner: &str,
        repo: &str,
        branch: &str,
        center: DateTime<Utc>,
        span_days: u32,
    ) -> Result<Vec<CommitDetail>, SourceError> {
        github::list_commits_in_window(self, owner, repo, branch, center, span_days)
    }

    /// Fetches an issue or hybrid page.
    pub fn fetch_page(&self, url: &str) -> Result<Page, SourceError> {
        let resp = self.get(url)?;
        expect_success(&resp, url)?;
        let final_url = urlnorm::normalize(&resp.final_url).unwrap_or_else(|_| url.to_string());
        Ok(Page { final_url, body: resp.text() })
    }

    pub(crate) fn get(&self, url: &str) -> Result<HttpResponse, SourceError> {
        let resp = self.http.get(url)?;
        if resp.is_rate_limited() {
            return Err(SourceError::RateLimited(url.to_string()));
        }
        Ok(resp)
    }
}

pub(crate) fn expect_success(resp: &HttpResponse, url: &str) -> Result<(), SourceError> {
    match resp.status {
        200..=299 => Ok(()),
        404 | 410 => Err(SourceError::NotFound(url.to_string())),
        status => Err(SourceError::Http { url: url.to_string(), status }),
    }
}
