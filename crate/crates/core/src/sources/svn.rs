//! SVN revisions, read from the ViewVC revision page or `svn log -v` text.

use std::sync::LazyLock;

use regex::Regex;
use scraper::{Html, Selector};

use super::{expect_success, CommitDetail, CommitRef, SourceError, Sources};

static LOG_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\s*[AMDR]\s+(/\S+)").unwrap());
static ROW: LazyLock<Selector> = LazyLock::new(|| Selector::parse("tr").unwrap());
static CELL: LazyLock<Selector> = LazyLock::new(|| Selector::parse("td").unwrap());
static VC_LOG: LazyLock<Selector> = LazyLock::new(|| Selector::parse("pre.vc_log, .vc_log").unwrap());

const CHANGE_WORDS: &[&str] = &["modified", "added", "deleted", "replaced", "copied", "moved"];

pub(super) fn fetch_commit(sources: &Sources, commit: &CommitRef) -> Result<CommitDetail, SourceError> {
    let resp = sources.get(&commit.url)?;
    expect_success(&resp, &commit.url)?;
    let (message, changed_paths) = parse_revision_page(&resp.text());
    Ok(CommitDetail {
        commit: commit.clone(),
        message,
        changed_paths,
        committed_at: None,
        authored_at: None,
        branch_hint: None,
        is_merge: false,
    })
}

pub(crate) fn parse_revision_page(body: &str) -> (String, Vec<String>) {
    let doc = Html::parse_document(body);
    let mut paths = Vec::new();
    for row in doc.select(&ROW) {
        let cells: Vec<String> = row.select(&CELL).map(|c| c.text().collect::<String>().trim().to_string()).collect();
        if cells.len() >= 2 && cells[1..].iter().any(|c| CHANGE_WORDS.contains(&c.to_lowercase().as_str())) {
            paths.push(cells[0].trim_start_matches('/').to_string());
        }
    }
    if paths.is_empty() {
        let text: String = doc.root_element().text().collect();
        paths = LOG_LINE
            .captures_iter(&text)
            .map(|c| c[1].trim_start_matches('/').to_string())
            .collect();
    }
    let message = doc
        .select(&VC_LOG)
        .next()
        .map(|e| e.text().collect::<String>().trim().to_string())
        .unwrap_or_default();
    (message, paths)
}
