//! GitHub REST: commit search, branch listing, commit listing, single commit.

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::Deserialize;
use url::Url;

use super::{expect_success, CommitDetail, CommitRef, SourceError, Sources, SEARCH_RESULT_CAP};

pub(crate) const PER_PAGE: usize = 100;

/// One commit returned by the search API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchHit {
    pub commit: CommitRef,
    pub message: String,
    pub committed_at: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct SearchPage {
    #[serde(default)]
    items: Vec<SearchItem>,
}

#[derive(Deserialize)]
struct SearchItem {
    sha: String,
    commit: CommitBody,
    repository: Repository,
}

#[derive(Deserialize)]
struct Repository {
    name: String,
    owner: Owner,
}

#[derive(Deserialize)]
struct Owner {
    login: String,
}

#[derive(Deserialize)]
struct CommitBody {
    #[serde(default)]
    message: String,
    #[serde(default)]
    committer: Option<Signature>,
    #[serde(default)]
    author: Option<Signature>,
}

#[derive(Deserialize)]
struct Signature {
    #[serde(default)]
    date: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct ListedCommit {
    sha: String,
    commit: CommitBody,
    #[serde(default)]
    parents: Vec<Parent>,
}

#[derive(Deserialize)]
struct Parent {}

#[derive(Deserialize)]
struct SingleCommit {
    sha: String,
    commit: CommitBody,
    #[serde(default)]
    parents: Vec<Parent>,
    #[serde(default)]
    files: Vec<File>,
}

#[derive(Deserialize)]
struct File {
    filename: String,
}

#[derive(Deserialize)]
struct Branch {
    name: String,
}

fn api_url(sources: &Sources, path: &str, query: &[(&str, &str)]) -> String {
    let mut url = Url::parse(&format!("{}{}", sources.endpoints.github_api.trim_end_matches('/'), path))
        .expect("github api base is a valid URL");
    if !query.is_empty() {
        url.query_pairs_mut().extend_pairs(query);
    }
    url.to_string()
}

pub(crate) fn search_url(sources: &Sources, query: &str, page: usize) -> String {
    api_url(
        sources,
        "/search/commits",
        &[("q", query), ("per_page", &PER_PAGE.to_string()), ("page", &page.to_string())],
    )
}

pub(crate) fn branches_url(sources: &Sources, owner: &str, repo: &str, page: usize) -> String {
    api_url(
        sources,
        &format!("/repos/{owner}/{repo}/branches"),
        &[("per_page", &PER_PAGE.to_string()), ("page", &page.to_string())],
    )
}

pub(crate) fn commit_url(sources: &Sources, owner: &str, repo: &str, sha: &str) -> String {
    api_url(sources, &format!("/repos/{owner}/{repo}/commits/{sha}"), &[])
}

pub(crate) fn window_bounds(center: DateTime<Utc>, span_days: u32) -> (DateTime<Utc>, DateTime<Utc>) {
    let span = Duration::seconds(i64::from(span_days) * 86_400);
    (center - span, center + span)
}

pub(crate) fn commits_url(
    sources: &Sources,
    owner: &str,
    repo: &str,
    branch: &str,
    since: DateTime<Utc>,
    until: DateTime<Utc>,
    page: usize,
) -> String {
    api_url(
        sources,
        &format!("/repos/{owner}/{repo}/commits"),
        &[
            ("sha", branch),
            ("since", &since.to_rfc3339_opts(SecondsFormat::Secs, true)),
            ("until", &until.to_rfc3339_opts(SecondsFormat::Secs, true)),
            ("per_page", &PER_PAGE.to_string()),
            ("page", &page.to_string()),
        ],
    )
}

fn get_json<T: for<'de> Deserialize<'de>>(sources: &Sources, url: &str) -> Result<Option<T>, SourceError> {
    let resp = sources.get(url)?;
    // The search API answers 422 past its result window.
    if resp.status == 422 {
        return Ok(None);
    }
    expect_success(&resp, url)?;
    serde_json::from_slice(&resp.body).map(Some).map_err(|e| SourceError::parse(url, e))
}

pub(super) fn search_commits(sources: &Sources, query: &str) -> Result<Vec<SearchHit>, SourceError> {
    if query.trim().is_empty() {
        return Err(SourceError::InvalidInput("empty search query".into()));
    }
    let mut hits = Vec::new();
    let max_pages = SEARCH_RESULT_CAP.div_ceil(PER_PAGE);
    for page in 1..=max_pages {
        let url = search_url(sources, query, page);
        let Some(parsed) = get_json::<SearchPage>(sources, &url)? else { break };
        let n = parsed.items.len();
        hits.extend(parsed.items.into_iter().map(|item| SearchHit {
            commit: CommitRef::github(&item.repository.owner.login, &item.repository.name, &item.sha),
            message: item.commit.message,
            committed_at: item.commit.committer.and_then(|c| c.date),
        }));
        if n < PER_PAGE || hits.len() >= SEARCH_RESULT_CAP {
            break;
        }
    }
    hits.truncate(SEARCH_RESULT_CAP);
    Ok(hits)
}

pub(super) fn fetch_commit(sources: &Sources, commit: &CommitRef) -> Result<CommitDetail, SourceError> {
    if commit.owner.is_empty() || commit.repo.is_empty() {
        return Err(SourceError::InvalidInput(format!("GitHub commit without owner/repo: {}", commit.url)));
    }
    let url = commit_url(sources, &commit.owner, &commit.repo, &commit.commit_id);
    let resp = sources.get(&url)?;
    if resp.status == 422 {
        return Err(SourceError::NotFound(url));
    }
    expect_success(&resp, &url)?;
    let parsed: SingleCommit = serde_json::from_slice(&resp.body).map_err(|e| SourceError::parse(&url, e))?;
    Ok(CommitDetail {
        commit: CommitRef::github(&commit.owner, &commit.repo, &parsed.sha),
        message: parsed.commit.message,
        changed_paths: parsed.files.into_iter().map(|f| f.filename).collect(),
        committed_at: parsed.commit.committer.and_then(|c| c.date),
        authored_at: parsed.commit.author.and_then(|a| a.date),
        branch_hint: None,
        is_merge: parsed.parents.len() > 1,
    })
}

pub(super) fn list_branches(sources: &Sources, owner: &str, repo: &str) -> Result<Vec<String>, SourceError> {
    if owner.is_empty() || repo.is_empty() {
        return Err(SourceError::InvalidInput("owner and repo must be non-empty".into()));
    }
    let mut names = Vec::new();
    for page in 1.. {
        let url = branches_url(sources, owner, repo, page);
        let Some(branches) = get_json::<Vec<Branch>>(sources, &url)? else { break };
        let n = branches.len();
        names.extend(branches.into_iter().map(|b| b.name));
        if n < PER_PAGE {
            break;
        }
    }
    names.sort();
    names.dedup();
    Ok(names)
}

pub(super) fn list_commits_in_window(
    sources: &Sources,
    owner: &str,
    repo: &str,
    branch: &str,
    center: DateTime<Utc>,
    span_days: u32,
) -> Result<Vec<CommitDetail>, SourceError> {
    let (since, until) = window_bounds(center, span_days);
    let mut out = Vec::new();
    for page in 1.. {
        let url = commits_url(sources, owner, repo, branch, since, until, page);
        let Some(listed) = get_json::<Vec<ListedCommit>>(sources, &url)? else { break };
        let n = listed.len();
        for c in listed {
            let committed_at = c.commit.committer.as_ref().and_then(|s| s.date);
            if !committed_at.is_some_and(|t| t >= since && t <= until) {
                continue;
            }
            out.push(CommitDetail {
                commit: CommitRef::github(owner, repo, &c.sha),
                message: c.commit.message,
                changed_paths: Vec::new(),
                committed_at,
                authored_at: c.commit.author.and_then(|a| a.date),
                branch_hint: Some(branch.to_string()),
                is_merge: c.parents.len() > 1,
            });
        }
        if n < PER_PAGE {
            break;
        }
    }
    out.sort_by(|a, b| a.committed_at.cmp(&b.committed_at).then_with(|| a.commit.commit_id.cmp(&b.commit.commit_id)));
    Ok(out)
}
