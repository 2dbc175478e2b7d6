//! Red Hat Bugzilla REST: bug lookup by CVE alias, then each bug's comments.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{expect_success, AdvisoryDocument, SourceError, SourceId, Sources};
use crate::cve::CveId;

#[derive(Deserialize)]
struct BugList {
    #[serde(default)]
    bugs: Vec<Bug>,
}

#[derive(Deserialize)]
struct Bug {
    id: u64,
}

#[derive(Deserialize)]
struct CommentResponse {
    #[serde(default)]
    bugs: BTreeMap<String, BugComments>,
}

#[derive(Deserialize)]
struct BugComments {
    #[serde(default)]
    comments: Vec<Comment>,
}

#[derive(Deserialize)]
struct Comment {
    #[serde(default)]
    text: String,
}

pub(super) fn bug_lookup_url(sources: &Sources, cve: &CveId) -> String {
    format!("{}/bug?alias={}&include_fields=id", sources.endpoints.redhat_bugzilla, cve)
}

pub(super) fn comments_url(sources: &Sources, bug_id: u64) -> String {
    format!("{}/bug/{}/comment", sources.endpoints.redhat_bugzilla, bug_id)
}

/// Comments of every bug aliased to the CVE, concatenated in bug-id then
/// comment order. `None` when Red Hat does not track the CVE.
pub(super) fn fetch(sources: &Sources, cve: &CveId) -> Result<Option<AdvisoryDocument>, SourceError> {
    let url = bug_lookup_url(sources, cve);
    let resp = sources.get(&url)?;
    if resp.status == 404 {
        return Ok(None);
    }
    expect_success(&resp, &url)?;
    let list: BugList = serde_json::from_slice(&resp.body).map_err(|e| SourceError::parse(&url, e))?;
    if list.bugs.is_empty() {
        return Ok(None);
    }
    let mut ids: Vec<u64> = list.bugs.iter().map(|b| b.id).collect();
    ids.sort_unstable();
    ids.dedup();

    let mut bodies = Vec::new();
    for id in &ids {
        let url = comments_url(sources, *id);
        let resp = sources.get(&url)?;
        expect_success(&resp, &url)?;
        let parsed: CommentResponse = serde_json::from_slice(&resp.body).map_err(|e| SourceError::parse(&url, e))?;
        if let Some(bug) = parsed.bugs.get(&id.to_string()) {
            bodies.extend(bug.comments.iter().map(|c| c.text.clone()));
        }
    }
    let mut raw_fields = BTreeMap::new();
    raw_fields.insert("comments".to_string(), bodies.join("\n\n"));
    raw_fields.insert(
        "bugs".to_string(),
        ids.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
    Ok(Some(AdvisoryDocument { source: SourceId::RedHat, cve_id: cve.clone(), raw_fields, fetched_at: resp.recorded_at }))
}
