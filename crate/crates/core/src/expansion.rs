//! Expansion of a selected GitHub patch to related commits on other
//! branches of the same repository.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::extract::TrackingIdentifier;
use crate::network::{EdgeKind, FetchStatus, ReferenceNetwork, ReferenceNode};
use crate::extract::NodeKind;
use crate::sources::{CommitDetail, CommitRef, Platform, Sources};

static CHERRY_PICK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\(cherry[ -]picked from commit [0-9a-f]{7,40}\)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub span_days: u32,
    pub enabled: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { span_days: 30, enabled: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    /// Same message, or one message contains the other.
    MessageRelation,
    /// The message names the CVE or a harvested identifier.
    IdentifierMention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedPatch {
    pub commit: CommitRef,
    pub parent_patch: String,
    /// Every branch the commit was listed on, sorted.
    pub branches: Vec<String>,
    pub matched_by: MatchKind,
    /// The window is anchored on committer dates; author dates are kept
    /// for inspection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed_at: Option<chrono::DateTime<chrono::Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authored_at: Option<chrono::DateTime<chrono::Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpansionOutcome {
    pub patches: Vec<ExpandedPatch>,
    pub notes: Vec<String>,
}

/// Trim, drop cherry-pick trailers, collapse whitespace, case-fold.
pub fn normalize_message(message: &str) -> String {
    let stripped = CHERRY_PICK.replace_all(message, " ");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Substring match that refuses to land inside a longer alphanumeric token,
/// so `cve-2017-1142` does not match `cve-2017-11428`.
fn mentions(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let bytes = haystack.as_bytes();
    haystack.match_indices(needle).any(|(i, _)| {
        let before = i.checked_sub(1).map(|j| bytes[j]);
        let after = bytes.get(i + needle.len()).copied();
        !before.is_some_and(|b| b.is_ascii_alphanumeric()) && !after.is_some_and(|b| b.is_ascii_alphanumeric())
    })
}

pub fn messages_match(candidate: &str, selected: &str, identifiers: &[TrackingIdentifier]) -> Option<MatchKind> {
    let cand = normalize_message(candidate);
    let sel = normalize_message(selected);
    if cand.is_empty() {
        return None;
    }
    if !sel.is_empty() && (cand.contains(&sel) || sel.contains(&cand)) {
        return Some(MatchKind::MessageRelation);
    }
    identifiers
        .iter()
        .any(|id| mentions(&cand, &id.text.to_lowercase()))
        .then_some(MatchKind::IdentifierMention)
}

/// Lists every branch of the selected patch's repository, reads the commits
/// within `span_days` of the patch's committer date and keeps the ones whose
/// message matches. Matches become children of the selected patch.
pub fn expand_patch(
    network: &mut ReferenceNetwork,
    selected_id: &str,
    config: &ExpansionConfig,
    identifiers: &[TrackingIdentifier],
    sources: &Sources,
) -> ExpansionOutcome {
    let mut outcome = ExpansionOutcome::default();
    if !config.enabled {
        return outcome;
    }
    let Some(node) = network.node(selected_id) else {
        outcome.notes.push(format!("expansion skipped: unknown node {selected_id}"));
        return outcome;
    };
    let Some(commit) = node.commit.clone() else {
        outcome.notes.push(format!("expansion skipped: no commit for {selected_id}"));
        return outcome;
    };
    if commit.platform != Platform::GitHubCommit {
        outcome.notes.push(format!("expansion skipped: non-GitHub {selected_id}"));
        return outcome;
    }
    let detail = match node.detail.clone() {
        Some(d) => d,
        None => match sources.fetch_commit(&commit) {
            Ok(d) => d,
            Err(e) => {
                outcome.notes.push(format!("expansion skipped: {selected_id}: {e}"));
                return outcome;
            }
        },
    };
    let Some(center) = detail.committed_at else {
        outcome.notes.push(format!("expansion skipped: no commit date for {selected_id}"));
        return outcome;
    };
    let branches = match sources.list_branches(&commit.owner, &commit.repo) {
        Ok(b) => b,
        Err(e) => {
            outcome.notes.push(format!("expansion skipped: branches of {}/{}: {e}", commit.owner, commit.repo));
            return outcome;
        }
    };

    let listings: Vec<(String, Result<Vec<CommitDetail>, _>)> = branches
        .into_par_iter()
        .map(|b| {
            let r = sources.list_commits_in_window(&commit.owner, &commit.repo, &b, center, config.span_days);
            (b, r)
        })
        .collect();

    let mut found: BTreeMap<String, (CommitDetail, BTreeSet<String>, MatchKind)> = BTreeMap::new();
    for (branch, result) in listings {
        let listed = match result {
            Ok(l) => l,
            Err(e) => {
                outcome.notes.push(format!("branch {branch} skipped: {e}"));
                continue;
            }
        };
        for c in listed {
            if c.commit.commit_id == commit.commit_id {
                continue;
            }
            let Some(kind) = messages_match(&c.message, &detail.message, identifiers) else { continue };
            found
                .entry(c.commit.commit_id.clone())
                .or_insert_with(|| (c.clone(), BTreeSet::new(), kind))
                .1
                .insert(branch.clone());
        }
    }

    for (_, (c, branches, kind)) in found {
        let id = c.commit.url.clone();
        if !network.contains(&id) {
            let mut n = ReferenceNode::new(id.clone(), NodeKind::Patch, FetchStatus::Fetched);
            n.commit = Some(c.commit.clone());
            n.detail = Some(CommitDetail { branch_hint: branches.iter().next().cloned(), ..c.clone() });
            network.add_node(n);
        }
        if !network.reaches(&id, selected_id) {
            network.add_edge(selected_id, &id, EdgeKind::Expansion);
        }
        outcome.patches.push(ExpandedPatch {
            commit: c.commit,
            parent_patch: selected_id.to_string(),
            branches: branches.into_iter().collect(),
            matched_by: kind,
            committed_at: c.committed_at,
            authored_at: c.authored_at,
        });
    }
    outcome.patches.sort_by(|a, b| (&a.branches, &a.commit.commit_id).cmp(&(&b.branches, &b.commit.commit_id)));
    outcome.notes.sort();
    outcome
}
