//! Patch / issue / hybrid classification of reference URLs.
//!
//! Patterns (kept verbatim in the README):
//!
//! - commit id: 7-40 hex digits forming a whole segment after `commit/`,
//!   `commits/`, `rev/`, `?id=` or `revision=`
//! - SVN revision: `/r<digits>`, `rev=<digits>` or `revision=<digits>`
//! - issue id: `[A-Z][A-Z0-9]+-\d+`, or digits after `/issues/`, `/bugs/`, `id=`
//!
//! A URL is a patch if it contains `git` and a commit id, or `svn` and a
//! revision. Otherwise it is an issue if it is a GitHub issue or pull request,
//! or contains one of `bugzilla`, `jira`, `issues`, `bugs`, `tickets`,
//! `tracker` together with an issue id. Everything else is hybrid.

use std::collections::HashSet;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::sources::{CommitRef, Platform};

static COMMIT_ID: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:commits?/|rev/|[?&;]id=|revision=)([0-9a-fA-F]{7,40})(?:$|[/?#&;.])").unwrap()
});
static SVN_REVISION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:/r|[?&;]rev=|[?&;]revision=)(\d+)(?:$|[/?#&;])").unwrap());
static ISSUE_KEY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Z][A-Z0-9]+-\d+)").unwrap());
static ISSUE_NUMERIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:/issues/|/bugs/|id=)\d+").unwrap());
static GITHUB_COMMIT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^https://github\.com/([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+)/commit/([0-9a-f]{7,40})$").unwrap()
});
static GITHUB_REPO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^https?://(?:www\.)?github\.com/([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+)").unwrap());

const ISSUE_KEYS: &[&str] = &["bugzilla", "jira", "issues", "bugs", "tickets", "tracker"];
/// Uppercase-dash-digits tokens that are not tracker keys.
const NOT_IDENTIFIERS: &[&str] = &["CVE", "CWE", "UTF", "SHA", "ISO", "RFC"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Root,
    AdvisorySource,
    Patch,
    Issue,
    Hybrid,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Root => "root",
            NodeKind::AdvisorySource => "source",
            NodeKind::Patch => "patch",
            NodeKind::Issue => "issue",
            NodeKind::Hybrid => "hybrid",
        })
    }
}

fn is_patch(url: &str) -> bool {
    let lower = url.to_ascii_lowercase();
    (lower.contains("git") && COMMIT_ID.is_match(url)) || (lower.contains("svn") && SVN_REVISION.is_match(url))
}

fn is_issue(url: &str) -> bool {
    let lower = url.to_ascii_lowercase();
    if lower.contains("/github.com/") && (lower.contains("/issues/") || lower.contains("/pull/")) {
        return true;
    }
    ISSUE_KEYS.iter().any(|k| lower.contains(k)) && (ISSUE_KEY.is_match(url) || ISSUE_NUMERIC.is_match(url))
}

/// Classifies a normalized reference URL. The patch rule wins over the
/// issue rule; hybrid is the fallback.
pub fn classify_reference(url: &str) -> NodeKind {
    if is_patch(url) {
        NodeKind::Patch
    } else if is_issue(url) {
        NodeKind::Issue
    } else {
        NodeKind::Hybrid
    }
}

/// Commit coordinates of a patch URL.
pub fn commit_ref_from_url(url: &str) -> Option<CommitRef> {
    if let Some(c) = GITHUB_COMMIT.captures(url) {
        return Some(CommitRef::github(&c[1], &c[2], &c[3]));
    }
    let lower = url.to_ascii_lowercase();
    if lower.contains("svn") {
        if let Some(c) = SVN_REVISION.captures(url) {
            return Some(CommitRef {
                platform: Platform::SvnCommit,
                url: url.to_string(),
                owner: String::new(),
                repo: String::new(),
                commit_id: format!("r{}", &c[1]),
            });
        }
    }
    if lower.contains("git") {
        if let Some(c) = COMMIT_ID.captures(url) {
            return Some(CommitRef {
                platform: Platform::OtherGitCommit,
                url: url.to_string(),
                owner: String::new(),
                repo: String::new(),
                commit_id: c[1].to_ascii_lowercase(),
            });
        }
    }
    None
}

/// `(owner, repo)` of a GitHub URL, lowercased.
pub fn github_repo(url: &str) -> Option<(String, String)> {
    GITHUB_REPO
        .captures(url)
        .map(|c| (c[1].to_ascii_lowercase(), c[2].trim_end_matches(".git").to_ascii_lowercase()))
}

/// GitHub issue or pull request page.
pub fn is_github_issue(url: &str) -> bool {
    let lower = url.to_ascii_lowercase();
    github_repo(url).is_some() && (lower.contains("/issues/") || lower.contains("/pull/"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierKind {
    CveId,
    IssueId,
    AdvisoryId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackingIdentifier {
    pub kind: IdentifierKind,
    pub text: String,
    pub origin_url: String,
}

impl TrackingIdentifier {
    pub fn cve(cve: &crate::cve::CveId) -> Self {
        TrackingIdentifier { kind: IdentifierKind::CveId, text: cve.to_string(), origin_url: String::new() }
    }
}

fn key_identifiers(url: &str) -> Vec<String> {
    let mut out = Vec::new();
    for m in ISSUE_KEY.find_iter(url) {
        let text = m.as_str();
        // `RHSA-2019:1234` and the like are dates inside a larger id.
        if url[m.end()..].starts_with(':') {
            continue;
        }
        let prefix = text.split('-').next().unwrap_or_default();
        if NOT_IDENTIFIERS.contains(&prefix) {
            continue;
        }
        out.push(text.to_string());
    }
    out
}

/// Issue identifiers from issue URLs and advisory identifiers from hybrid
/// URLs. Only the `KEY-123` form is harvested: bare tracker numbers are
/// useless as commit-search keys. Deduplicated by `(kind, text)`.
pub fn extract_tracking_identifiers<'a>(
    refs: impl IntoIterator<Item = (&'a str, NodeKind)>,
) -> Vec<TrackingIdentifier> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (url, kind) in refs {
        let id_kind = match kind {
            NodeKind::Issue => IdentifierKind::IssueId,
            NodeKind::Hybrid => IdentifierKind::AdvisoryId,
            _ => continue,
        };
        for text in key_identifiers(url) {
            if seen.insert((id_kind, text.clone())) {
                out.push(TrackingIdentifier { kind: id_kind, text, origin_url: url.to_string() });
            }
        }
    }
    out
}
