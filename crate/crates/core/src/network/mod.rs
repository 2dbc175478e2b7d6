//! The layered reference network rooted at a CVE.

mod builder;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

pub use builder::{augment_from_github, build_network, expand_node, BuildConfig, BuildError};

use crate::cve::CveId;
use crate::extract::{NodeKind, TrackingIdentifier};
use crate::sources::{CommitDetail, CommitRef, CpeEntry, SourceId};

pub const NETWORK_SCHEMA: &str = "patchnet.network/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Fetched,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceNode {
    pub id: String,
    pub kind: NodeKind,
    /// Advisory sources whose subtree contains this node.
    #[serde(default)]
    pub source_flags: BTreeSet<SourceId>,
    /// Test-only or non-source patch, kept for display but never selected.
    #[serde(default)]
    pub removed: bool,
    pub fetch_status: FetchStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commit: Option<CommitRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<CommitDetail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReferenceNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, fetch_status: FetchStatus) -> Self {
        ReferenceNode {
            id: id.into(),
            kind,
            source_flags: BTreeSet::new(),
            removed: false,
            fetch_status,
            commit: None,
            detail: None,
            note: None,
        }
    }

    /// The advisory source this node stands for, if it is a source node.
    pub fn source(&self) -> Option<SourceId> {
        source_of(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Reference,
    /// Selected patch to a commit found on another branch.
    Expansion,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    CrossRepository,
    Cycle,
}

/// A reference that was seen but not added.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExcludedRef {
    pub url: String,
    pub parent: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "message")]
pub enum SourceStatus {
    Tracked,
    NotTracked,
    Unavailable(String),
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceNetwork {
    pub schema: String,
    pub cve_id: CveId,
    pub root: String,
    pub depth_limit: u32,
    pub nodes: BTreeMap<String, ReferenceNode>,
    pub edges: BTreeSet<Edge>,
    #[serde(default)]
    pub excluded: BTreeSet<ExcludedRef>,
    #[serde(default)]
    pub sources: BTreeMap<SourceId, SourceStatus>,
    #[serde(default)]
    pub identifiers: Vec<TrackingIdentifier>,
    #[serde(default)]
    pub cpes: Vec<CpeEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub fn root_id(cve: &CveId) -> String {
    format!("cve:{cve}")
}

pub fn source_node_id(source: SourceId) -> String {
    format!("source:{}", source.as_str())
}

pub fn source_of(id: &str) -> Option<SourceId> {
    id.strip_prefix("source:").and_then(|s| s.parse().ok())
}

impl ReferenceNetwork {
    pub fn new(cve: &CveId, depth_limit: u32) -> Self {
        let root = root_id(cve);
        let mut nodes = BTreeMap::new();
        nodes.insert(root.clone(), ReferenceNode::new(root.clone(), NodeKind::Root, FetchStatus::Fetched));
        ReferenceNetwork {
            schema: NETWORK_SCHEMA.to_string(),
            cve_id: cve.clone(),
            root,
            depth_limit,
            nodes,
            edges: BTreeSet::new(),
            excluded: BTreeSet::new(),
            sources: BTreeMap::new(),
            identifiers: Vec::new(),
            cpes: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn node(&self, id: &str) -> Option<&ReferenceNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn add_node(&mut self, node: ReferenceNode) -> bool {
        if self.nodes.contains_key(&node.id) {
            return false;
        }
        self.nodes.insert(node.id.clone(), node);
        true
    }

    pub fn add_edge(&mut self, parent: &str, child: &str, kind: EdgeKind) -> bool {
        self.edges.insert(Edge { parent: parent.to_string(), child: child.to_string(), kind })
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.parent == id)
    }

    pub fn parents<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.child == id)
    }

    /// Child lists keyed by parent, reference edges only.
    pub fn reference_adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Reference) {
            adj.entry(e.parent.as_str()).or_default().push(e.child.as_str());
        }
        adj
    }

    /// Whether `to` is reachable from `from` along any edges.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        if from == to {
            return true;
        }
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.parent.as_str()).or_default().push(e.child.as_str());
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(adj.get(n).into_iter().flatten().copied());
            }
        }
        false
    }

    /// Shortest-path depth from the root over reference edges; expansion
    /// children sit one below their selected patch.
    pub fn depths(&self) -> BTreeMap<String, u32> {
        let mut adj: BTreeMap<&str, Vec<(&str, EdgeKind)>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.parent.as_str()).or_default().push((e.child.as_str(), e.kind));
        }
        let mut depth = BTreeMap::new();
        depth.insert(self.root.clone(), 0u32);
        let mut queue = VecDeque::from([self.root.as_str()]);
        while let Some(n) = queue.pop_front() {
            let d = depth[n];
            for (c, _) in adj.get(n).into_iter().flatten() {
                if !depth.contains_key(*c) {
                    depth.insert(c.to_string(), d + 1);
                    queue.push_back(c);
                }
            }
        }
        depth
    }

    pub fn is_acyclic(&self) -> bool {
        let mut indeg: BTreeMap<&str, usize> = self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for e in &self.edges {
            *indeg.entry(e.child.as_str()).or_default() += 1;
        }
        let mut ready: Vec<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut visited = 0;
        while let Some(n) = ready.pop() {
            visited += 1;
            for e in self.edges.iter().filter(|e| e.parent == n) {
                let d = indeg.get_mut(e.child.as_str()).expect("edge endpoint");
                *d -= 1;
                if *d == 0 {
                    ready.push(e.child.as_str());
                }
            }
        }
        visited == indeg.len()
    }

    pub fn source_ids(&self) -> Vec<SourceId> {
        self.nodes.values().filter_map(ReferenceNode::source).collect()
    }

    /// Non-root, non-source nodes.
    pub fn reference_count(&self) -> usize {
        self.nodes
            .values()
            .filter(|n| !matches!(n.kind, NodeKind::Root | NodeKind::AdvisorySource))
            .count()
    }

    /// Recomputes `source_flags` from reference edges.
    pub fn recompute_source_flags(&mut self) {
        let adj: BTreeMap<String, Vec<String>> = self
            .reference_adjacency()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
            .collect();
        for n in self.nodes.values_mut() {
            n.source_flags.clear();
        }
        for source in self.source_ids() {
            let start = source_node_id(source);
            let mut seen = BTreeSet::new();
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                if !seen.insert(n.clone()) {
                    continue;
                }
                if let Some(cs) = adj.get(&n) {
                    stack.extend(cs.iter().cloned());
                }
            }
            for id in seen {
                if let Some(node) = self.nodes.get_mut(&id) {
                    if !matches!(node.kind, NodeKind::Root) {
                        node.source_flags.insert(source);
                    }
                }
            }
        }
    }

    /// Checks the structural invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if !self.nodes.contains_key(&self.root) {
            return Err("root missing".into());
        }
        for e in &self.edges {
            if !self.nodes.contains_key(&e.parent) || !self.nodes.contains_key(&e.child) {
                return Err(format!("dangling edge {} -> {}", e.parent, e.child));
            }
            if e.child == self.root {
                return Err("root has a parent".into());
            }
        }
        if !self.is_acyclic() {
            return Err("cycle".into());
        }
        let depths = self.depths();
        for n in self.nodes.values() {
            if !depths.contains_key(&n.id) {
                return Err(format!("unreachable node {}", n.id));
            }
            if n.removed && n.kind != NodeKind::Patch {
                return Err(format!("removed non-patch {}", n.id));
            }
            let parents: Vec<&Edge> = self.parents(&n.id).collect();
            match n.kind {
                NodeKind::AdvisorySource => {
                    if parents.iter().any(|e| e.parent != self.root) {
                        return Err(format!("source {} below root", n.id));
                    }
                }
                NodeKind::Hybrid if parents.iter().any(|e| source_of(&e.parent).is_none()) => {
                    return Err(format!("hybrid {} below a non-source", n.id));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids() {
        let cve = CveId::parse("CVE-2017-11428").unwrap();
        assert_eq!(root_id(&cve), "cve:CVE-2017-11428");
        assert_eq!(source_node_id(SourceId::RedHat), "source:redhat");
        assert_eq!(source_of("source:github"), Some(SourceId::GitHub));
        assert_eq!(source_of("https://x"), None);
    }

    #[test]
    fn cycle_detection() {
        let cve = CveId::parse("CVE-2020-0001").unwrap();
        let mut n = ReferenceNetwork::new(&cve, 5);
        for id in ["a", "b"] {
            n.add_node(ReferenceNode::new(id, NodeKind::Issue, FetchStatus::Fetched));
        }
        n.add_edge(&n.root.clone(), "a", EdgeKind::Reference);
        n.add_edge("a", "b", EdgeKind::Reference);
        assert!(n.is_acyclic());
        assert!(n.reaches("a", "b"));
        n.add_edge("b", "a", EdgeKind::Reference);
        assert!(!n.is_acyclic());
    }
}
