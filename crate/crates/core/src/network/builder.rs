use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    source_node_id, EdgeKind, ExcludedRef, ExclusionReason, FetchStatus, ReferenceNetwork, ReferenceNode,
    SourceStatus,
};
use crate::cve::CveId;
use crate::extract::{
    classify_reference, commit_ref_from_url, cpe_name_match, extract_tracking_identifiers, extract_urls,
    github_repo, is_github_issue, is_test_or_nonsource_only, NodeKind, SourceExtensions, TrackingIdentifier,
};
use crate::sources::{AdvisoryDocument, CpeEntry, Platform, SourceError, SourceId, Sources};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub depth_limit: u32,
    pub enabled_sources: BTreeSet<SourceId>,
    /// Direct advisory references only; issue and hybrid pages are not read.
    #[serde(default)]
    pub flat: bool,
    #[serde(default)]
    pub extensions: SourceExtensions,
    /// Size of the fetch pool; `None` uses the global pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Permutes fetch job order. The resulting network must not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_shuffle_seed: Option<u64>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            depth_limit: 5,
            enabled_sources: SourceId::ALL.into_iter().collect(),
            flat: false,
            extensions: SourceExtensions::default(),
            workers: None,
            fetch_shuffle_seed: None,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.depth_limit < 2 {
            return Err(BuildError::InvalidConfig(format!("depth limit {} is below 2", self.depth_limit)));
        }
        if self.workers == Some(0) {
            return Err(BuildError::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("invalid build configuration: {0}")]
    InvalidConfig(String),
    /// No source yielded a reference. The network holds the root, any source
    /// nodes and the per-source statuses.
    #[error("no advisory source yielded any reference")]
    EmptyNetwork(Box<ReferenceNetwork>),
}

enum Advisory {
    Doc(AdvisoryDocument),
    NotTracked,
    Failed(String),
}

struct Pending {
    parent: String,
    url: String,
    kind: NodeKind,
}

struct Builder<'a> {
    sources: &'a Sources,
    config: &'a BuildConfig,
    /// Patch URL as referenced -> resolved node.
    resolved: HashMap<String, ReferenceNode>,
    depth: BTreeMap<String, u32>,
}

pub fn build_network(cve: &CveId, sources: &Sources, config: &BuildConfig) -> Result<ReferenceNetwork, BuildError> {
    config.validate()?;
    with_pool(config, || {
        let mut b = Builder::new(sources, config);
        b.build(cve)
    })
}

/// Analyzes one node: prune check for a patch, page read for an issue or
/// hybrid above the depth limit. Returns the ids of newly added nodes.
pub fn expand_node(
    network: &mut ReferenceNetwork,
    node_id: &str,
    sources: &Sources,
    config: &BuildConfig,
) -> Result<Vec<String>, BuildError> {
    config.validate()?;
    let Some(node) = network.node(node_id).cloned() else {
        return Ok(Vec::new());
    };
    let mut b = Builder::new(sources, config);
    b.depth = network.depths();
    let depth = b.depth.get(node_id).copied().unwrap_or(0);
    let added = match node.kind {
        NodeKind::Patch => {
            let resolved = b.resolve_patch(node_id);
            if let Some(n) = network.nodes.get_mut(node_id) {
                n.removed = resolved.removed;
                n.fetch_status = resolved.fetch_status;
                n.commit = resolved.commit;
                n.detail = resolved.detail;
                n.note = resolved.note;
            }
            Vec::new()
        }
        NodeKind::Issue | NodeKind::Hybrid if depth < config.depth_limit && !config.flat => {
            let pending = b.read_pages(network, &[node_id.to_string()]);
            b.merge(network, pending, depth + 1)
        }
        _ => Vec::new(),
    };
    network.recompute_source_flags();
    Ok(added)
}

/// Searches GitHub commits by the CVE id and each identifier and attaches
/// hits that match a CPE and touch non-test source code under the GitHub
/// source node. Returns the ids that gained a GitHub edge.
pub fn augment_from_github(
    network: &mut ReferenceNetwork,
    cve: &CveId,
    identifiers: &[TrackingIdentifier],
    cpes: &[CpeEntry],
    sources: &Sources,
    config: &BuildConfig,
) -> Vec<String> {
    let mut b = Builder::new(sources, config);
    b.depth = network.depths();
    b.augment(network, cve, identifiers, cpes)
}

fn with_pool<R: Send>(config: &BuildConfig, f: impl FnOnce() -> R + Send) -> R {
    match config.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn shuffle_key(seed: u64, key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    h.finalize().into()
}

impl<'a> Builder<'a> {
    fn new(sources: &'a Sources, config: &'a BuildConfig) -> Self {
        Builder { sources, config, resolved: HashMap::new(), depth: BTreeMap::new() }
    }

    /// Runs `f` over `keys` on the pool and returns results keyed by input.
    fn fan_out<R: Send>(&self, mut keys: Vec<String>, f: impl Fn(&str) -> R + Sync) -> BTreeMap<String, R> {
        if let Some(seed) = self.config.fetch_shuffle_seed {
            keys.sort_by_cached_key(|k| shuffle_key(seed, k));
        }
        keys.into_par_iter().map(|k| {
            let r = f(&k);
            (k, r)
        }).collect()
    }

    fn build(&mut self, cve: &CveId) -> Result<ReferenceNetwork, BuildError> {
        let mut net = ReferenceNetwork::new(cve, self.config.depth_limit);
        self.depth.insert(net.root.clone(), 0);
        let enabled = &self.config.enabled_sources;

        // NVD is read for its CPEs whenever GitHub augmentation runs.
        let mut wanted: Vec<SourceId> = [SourceId::Nvd, SourceId::Debian, SourceId::RedHat]
            .into_iter()
            .filter(|s| enabled.contains(s))
            .collect();
        if enabled.contains(&SourceId::GitHub) && !wanted.contains(&SourceId::Nvd) {
            wanted.push(SourceId::Nvd);
        }
        let sources = self.sources;
        let docs = self.fan_out(wanted.iter().map(|s| s.as_str().to_string()).collect(), |key| {
            let source: SourceId = key.parse().expect("source key");
            fetch_advisory(sources, source, cve)
        });

        let mut pending = Vec::new();
        for source in [SourceId::Nvd, SourceId::Debian, SourceId::RedHat] {
            let advisory = docs.get(source.as_str());
            if let (SourceId::Nvd, Some(Advisory::Doc(doc))) = (source, advisory) {
                net.cpes = doc.cpes();
            }
            if !enabled.contains(&source) {
                net.sources.insert(source, SourceStatus::Disabled);
                continue;
            }
            let status = match advisory {
                Some(Advisory::Doc(doc)) => {
                    let id = source_node_id(source);
                    net.add_node(ReferenceNode::new(id.clone(), NodeKind::AdvisorySource, FetchStatus::Fetched));
                    net.add_edge(&net.root.clone(), &id, EdgeKind::Reference);
                    self.depth.insert(id.clone(), 1);
                    for url in doc.reference_urls() {
                        pending.push(Pending { parent: id.clone(), kind: classify_reference(&url), url });
                    }
                    SourceStatus::Tracked
                }
                Some(Advisory::NotTracked) | None => SourceStatus::NotTracked,
                Some(Advisory::Failed(msg)) => SourceStatus::Unavailable(msg.clone()),
            };
            net.sources.insert(source, status);
        }
        net.cpes.sort();
        net.cpes.dedup();

        let mut frontier: Vec<String> = self
            .merge(&mut net, pending, 2)
            .into_iter()
            .filter(|id| matches!(net.nodes[id].kind, NodeKind::Issue | NodeKind::Hybrid))
            .collect();
        let mut depth = 2;
        while !frontier.is_empty() && depth < self.config.depth_limit && !self.config.flat {
            let pending = self.read_pages(&mut net, &frontier);
            depth += 1;
            frontier = self
                .merge(&mut net, pending, depth)
                .into_iter()
                .filter(|id| net.nodes[id].kind == NodeKind::Issue)
                .collect();
        }

        if enabled.contains(&SourceId::GitHub) {
            let identifiers = extract_tracking_identifiers(
                net.nodes.values().map(|n| (n.id.as_str(), n.kind)),
            );
            let cpes = net.cpes.clone();
            self.augment(&mut net, cve, &identifiers, &cpes);
        } else {
            net.sources.insert(SourceId::GitHub, SourceStatus::Disabled);
        }

        net.recompute_source_flags();
        net.notes.sort();
        net.notes.dedup();
        if net.reference_count() == 0 {
            return Err(BuildError::EmptyNetwork(Box::new(net)));
        }
        Ok(net)
    }

    fn resolve_patch(&self, url: &str) -> ReferenceNode {
        let Some(commit) = commit_ref_from_url(url) else {
            let mut node = ReferenceNode::new(url, NodeKind::Patch, FetchStatus::Skipped);
            node.note = Some("unrecognized commit URL".into());
            return node;
        };
        if commit.platform == Platform::OtherGitCommit {
            let mut node = ReferenceNode::new(url, NodeKind::Patch, FetchStatus::Skipped);
            node.note = Some("no adapter for this commit host".into());
            node.commit = Some(commit);
            return node;
        }
        match self.sources.fetch_commit(&commit) {
            Ok(detail) => {
                let mut node = ReferenceNode::new(detail.commit.url.clone(), NodeKind::Patch, FetchStatus::Fetched);
                node.removed = is_test_or_nonsource_only(&detail, &self.config.extensions);
                node.commit = Some(detail.commit.clone());
                node.detail = Some(detail);
                node
            }
            Err(e) => {
                let mut node = ReferenceNode::new(commit.url.clone(), NodeKind::Patch, FetchStatus::Failed);
                node.note = Some(e.to_string());
                node.commit = Some(commit);
                node
            }
        }
    }

    /// Fetches issue/hybrid pages and returns the patch and issue references
    /// they contain, minus cross-repository links from GitHub issues.
    fn read_pages(&mut self, net: &mut ReferenceNetwork, ids: &[String]) -> Vec<Pending> {
        let sources = self.sources;
        let pages = self.fan_out(ids.to_vec(), |id| sources.fetch_page(id));
        let mut pending = Vec::new();
        for (id, result) in pages {
            let page = match result {
                Ok(page) => page,
                Err(e) => {
                    if let Some(n) = net.nodes.get_mut(&id) {
                        n.fetch_status = FetchStatus::Failed;
                        n.note = Some(e.to_string());
                    }
                    continue;
                }
            };
            if let Some(n) = net.nodes.get_mut(&id) {
                n.fetch_status = FetchStatus::Fetched;
            }
            let own_repo = is_github_issue(&id).then(|| github_repo(&id)).flatten();
            for r in extract_urls(&page.body, &page.final_url) {
                let kind = classify_reference(&r.url);
                if kind == NodeKind::Hybrid || r.url == id || r.url == page.final_url {
                    continue;
                }
                if let Some(repo) = &own_repo {
                    if github_repo(&r.url).as_ref() != Some(repo) {
                        net.excluded.insert(ExcludedRef {
                            url: r.url,
                            parent: id.clone(),
                            reason: ExclusionReason::CrossRepository,
                        });
                        continue;
                    }
                }
                pending.push(Pending { parent: id.clone(), url: r.url, kind });
            }
        }
        pending
    }

    /// Inserts pending references at `depth`; returns new node ids, sorted.
    fn merge(&mut self, net: &mut ReferenceNetwork, mut pending: Vec<Pending>, depth: u32) -> Vec<String> {
        let unresolved: BTreeSet<String> = pending
            .iter()
            .filter(|p| p.kind == NodeKind::Patch && !self.resolved.contains_key(&p.url))
            .map(|p| p.url.clone())
            .collect();
        let resolved = self.fan_out(unresolved.into_iter().collect(), |url| self.resolve_patch(url));
        self.resolved.extend(resolved);

        pending.sort_by(|a, b| (&a.parent, &a.url).cmp(&(&b.parent, &b.url)));
        let mut added = Vec::new();
        for p in pending {
            let node = if p.kind == NodeKind::Patch {
                self.resolved[&p.url].clone()
            } else {
                ReferenceNode::new(p.url.clone(), p.kind, FetchStatus::Skipped)
            };
            let id = node.id.clone();
            if id == p.parent {
                continue;
            }
            if net.contains(&id) {
                if net.edges.iter().any(|e| e.parent == p.parent && e.child == id) {
                    continue;
                }
                if net.reaches(&id, &p.parent) {
                    net.excluded.insert(ExcludedRef { url: id, parent: p.parent, reason: ExclusionReason::Cycle });
                    continue;
                }
                net.add_edge(&p.parent, &id, EdgeKind::Reference);
            } else {
                net.add_node(node);
                net.add_edge(&p.parent, &id, EdgeKind::Reference);
                self.depth.insert(id.clone(), depth);
                added.push(id);
            }
        }
        added.sort();
        added
    }

    fn augment(
        &mut self,
        net: &mut ReferenceNetwork,
        cve: &CveId,
        identifiers: &[TrackingIdentifier],
        cpes: &[CpeEntry],
    ) -> Vec<String> {
        let mut keys = vec![cve.to_string()];
        for id in identifiers {
            if !keys.contains(&id.text) {
                keys.push(id.text.clone());
            }
        }
        net.identifiers = identifiers.to_vec();
        net.identifiers.sort();

        let sources = self.sources;
        let searches = self.fan_out(keys, |key| sources.search_github_commits(key));
        let mut hits = BTreeMap::new();
        let mut failures = 0;
        let total = searches.len();
        for (key, result) in searches {
            match result {
                Ok(list) => {
                    for hit in list {
                        hits.entry(hit.commit.url.clone()).or_insert(hit.commit);
                    }
                }
                Err(e) => {
                    failures += 1;
                    net.notes.push(format!("github search for {key} failed: {e}"));
                }
            }
        }
        let matching: Vec<String> = hits
            .iter()
            .filter(|(_, c)| cpe_name_match(&c.owner, &c.repo, cpes))
            .map(|(url, _)| url.clone())
            .collect();
        let unresolved: Vec<String> = matching
            .iter()
            .filter(|u| !self.resolved.contains_key(*u) && net.node(u).and_then(|n| n.detail.as_ref()).is_none())
            .cloned()
            .collect();
        let resolved = self.fan_out(unresolved, |url| self.resolve_patch(url));
        self.resolved.extend(resolved);

        let github = source_node_id(SourceId::GitHub);
        let mut attached = Vec::new();
        for url in matching {
            let node = match net.node(&url) {
                Some(n) if n.detail.is_some() => n.clone(),
                _ => self.resolved[&url].clone(),
            };
            let keep = node.fetch_status == FetchStatus::Fetched
                && node.detail.as_ref().is_some_and(|d| !is_test_or_nonsource_only(d, &self.config.extensions));
            if !keep {
                continue;
            }
            if !net.contains(&github) {
                net.add_node(ReferenceNode::new(github.clone(), NodeKind::AdvisorySource, FetchStatus::Fetched));
                net.add_edge(&net.root.clone(), &github, EdgeKind::Reference);
                self.depth.insert(github.clone(), 1);
            }
            let id = node.id.clone();
            if net.add_node(node) {
                self.depth.insert(id.clone(), 2);
            }
            if net.add_edge(&github, &id, EdgeKind::Reference) {
                attached.push(id);
            }
        }
        let status = if net.contains(&github) {
            SourceStatus::Tracked
        } else if total > 0 && failures == total {
            SourceStatus::Unavailable(format!("{failures} of {total} searches failed"))
        } else {
            SourceStatus::NotTracked
        };
        net.sources.insert(SourceId::GitHub, status);
        attached.sort();
        attached
    }
}

fn fetch_advisory(sources: &Sources, source: SourceId, cve: &CveId) -> Advisory {
    let result = match source {
        SourceId::Nvd => match sources.fetch_nvd_advisory(cve) {
            Ok(doc) => Ok(Some(doc)),
            Err(SourceError::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        },
        SourceId::Debian => sources.fetch_debian_advisory(cve),
        SourceId::RedHat => sources.fetch_redhat_advisory(cve),
        SourceId::GitHub => Ok(None),
    };
    match result {
        Ok(Some(doc)) => Advisory::Doc(doc),
        Ok(None) => Advisory::NotTracked,
        Err(e) => Advisory::Failed(e.to_string()),
    }
}
