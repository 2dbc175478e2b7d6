//! Patch selection: the confidence heuristic and path connectivity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::extract::NodeKind;
use crate::network::{source_node_id, source_of, ReferenceNetwork};
use crate::sources::SourceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityVariant {
    #[default]
    Full,
    PathLengthOnly,
    PathNumberOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub use_confidence: bool,
    pub use_connectivity: bool,
    pub connectivity_variant: ConnectivityVariant,
    /// Number of distinct top score levels kept by the connectivity argmax.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Select every candidate patch.
    #[serde(default)]
    pub select_all: bool,
}

fn default_top_k() -> usize {
    1
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            use_confidence: true,
            use_connectivity: true,
            connectivity_variant: ConnectivityVariant::Full,
            top_k: 1,
            select_all: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.use_confidence || self.use_connectivity || self.select_all) {
            return Err(SelectionError::InvalidConfig("no heuristic enabled".into()));
        }
        if self.top_k == 0 {
            return Err(SelectionError::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} is not a live patch node")]
    NotAPatch(String),
    #[error("invalid selection configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRecord {
    pub node_sequence: Vec<String>,
    pub origin_source: Option<SourceId>,
    pub raw_length: u32,
    pub effective_length: u32,
}

impl PathRecord {
    pub fn contribution(&self) -> Dyadic {
        Dyadic::pow2(1 - i64::from(self.effective_length))
    }
}

pub fn effective_length(origin: Option<SourceId>, raw_length: u32) -> u32 {
    match origin {
        Some(s) if s.is_high_confidence() => raw_length.saturating_sub(1),
        _ => raw_length,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityScore {
    pub patch_node: String,
    #[serde(with = "crate::dyadic::decimal")]
    pub path_count: BigUint,
    pub min_effective_length: Option<u32>,
    /// Sum over paths of `2^(1 - effective length)`.
    pub full: Dyadic,
}

impl ConnectivityScore {
    pub fn value(&self, variant: ConnectivityVariant) -> Dyadic {
        match variant {
            ConnectivityVariant::Full => self.full.clone(),
            ConnectivityVariant::PathLengthOnly => match self.min_effective_length {
                Some(l) => Dyadic::pow2(1 - i64::from(l)),
                None => Dyadic::zero(),
            },
            ConnectivityVariant::PathNumberOnly => Dyadic::from_int(self.path_count.clone()),
        }
    }
}

/// A node can lie on a scored path unless it is a removed patch.
fn traversable(network: &ReferenceNetwork, id: &str) -> bool {
    network.node(id).is_some_and(|n| !n.removed)
}

fn check_target(network: &ReferenceNetwork, id: &str) -> Result<(), SelectionError> {
    let node = network.node(id).ok_or_else(|| SelectionError::UnknownNode(id.to_string()))?;
    if node.kind != NodeKind::Patch || node.removed {
        return Err(SelectionError::NotAPatch(id.to_string()));
    }
    Ok(())
}

/// Every root-to-patch path over reference edges, in lexicographic order of
/// node sequences.
pub fn enumerate_paths(network: &ReferenceNetwork, patch: &str) -> Result<Vec<PathRecord>, SelectionError> {
    check_target(network, patch)?;
    let adj = network.reference_adjacency();
    let mut out = Vec::new();
    let mut stack = vec![network.root.as_str()];
    fn dfs<'a>(
        adj: &BTreeMap<&'a str, Vec<&'a str>>,
        network: &ReferenceNetwork,
        target: &str,
        stack: &mut Vec<&'a str>,
        out: &mut Vec<PathRecord>,
    ) {
        let last = *stack.last().expect("non-empty");
        if last == target {
            let origin = stack.get(1).and_then(|s| source_of(s));
            let raw = (stack.len() - 1) as u32;
            out.push(PathRecord {
                node_sequence: stack.iter().map(|s| s.to_string()).collect(),
                origin_source: origin,
                raw_length: raw,
                effective_length: effective_length(origin, raw),
            });
            return;
        }
        for &c in adj.get(last).into_iter().flatten() {
            if stack.contains(&c) || !traversable(network, c) {
                continue;
            }
            stack.push(c);
            dfs(adj, network, target, stack, out);
            stack.pop();
        }
    }
    dfs(&adj, network, patch, &mut stack, &mut out);
    Ok(out)
}

/// Path counts to `target` grouped by edge length, for every node that
/// reaches it. Memoized over the DAG.
fn counts_to<'a>(
    adj: &BTreeMap<&'a str, Vec<&'a str>>,
    network: &ReferenceNetwork,
    node: &'a str,
    target: &str,
    memo: &mut HashMap<&'a str, BTreeMap<u32, BigUint>>,
) -> BTreeMap<u32, BigUint> {
    if node == target {
        return BTreeMap::from([(0, BigUint::from(1u32))]);
    }
    if let Some(m) = memo.get(node) {
        return m.clone();
    }
    let mut acc: BTreeMap<u32, BigUint> = BTreeMap::new();
    for &c in adj.get(node).into_iter().flatten() {
        if !traversable(network, c) {
            continue;
        }
        for (len, n) in counts_to(adj, network, c, target, memo) {
            *acc.entry(len + 1).or_default() += n;
        }
    }
    memo.insert(node, acc.clone());
    acc
}

pub fn connectivity(network: &ReferenceNetwork, patch: &str) -> Result<ConnectivityScore, SelectionError> {
    check_target(network, patch)?;
    let adj = network.reference_adjacency();
    let mut memo = HashMap::new();
    let mut full = Dyadic::zero();
    let mut path_count = BigUint::ZERO;
    let mut min_eff: Option<u32> = None;
    for &first in adj.get(network.root.as_str()).into_iter().flatten() {
        if !traversable(network, first) {
            continue;
        }
        let origin = source_of(first);
        for (len, n) in counts_to(&adj, network, first, patch, &mut memo) {
            let raw = len + 1;
            let eff = effective_length(origin, raw);
            full = &full + &Dyadic::pow2(1 - i64::from(eff)).mul_int(&n);
            path_count += &n;
            min_eff = Some(min_eff.map_or(eff, |m| m.min(eff)));
        }
    }
    Ok(ConnectivityScore { patch_node: patch.to_string(), path_count, min_effective_length: min_eff, full })
}

/// Live patch nodes directly under the NVD or GitHub source node.
pub fn high_confidence_patches(network: &ReferenceNetwork) -> BTreeSet<String> {
    let confident: Vec<String> = SourceId::ALL
        .into_iter()
        .filter(|s| s.is_high_confidence())
        .map(source_node_id)
        .collect();
    network
        .edges
        .iter()
        .filter(|e| e.kind == crate::network::EdgeKind::Reference && confident.contains(&e.parent))
        .filter(|e| network.node(&e.child).is_some_and(|n| n.kind == NodeKind::Patch && !n.removed))
        .map(|e| e.child.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub node_id: String,
    pub connectivity: Dyadic,
    /// Score under the configured variant.
    pub score: Dyadic,
    #[serde(with = "crate::dyadic::decimal")]
    pub path_count: BigUint,
    pub confidence: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Selection {
    /// Every live patch with at least one path, sorted by node id.
    pub candidates: Vec<Candidate>,
}

impl Selection {
    pub fn selected(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.selected)
    }

    pub fn selected_ids(&self) -> BTreeSet<String> {
        self.selected().map(|c| c.node_id.clone()).collect()
    }
}

/// Scores every candidate and marks the selected ones: the confidence set
/// united with the argmax of the connectivity score (all ties).
pub fn select_patches(network: &ReferenceNetwork, config: &SelectionConfig) -> Result<Selection, SelectionError> {
    config.validate()?;
    let confident = high_confidence_patches(network);
    let mut candidates = Vec::new();
    for node in network.nodes.values().filter(|n| n.kind == NodeKind::Patch && !n.removed) {
        let score = connectivity(network, &node.id)?;
        if score.path_count == BigUint::ZERO {
            continue;
        }
        candidates.push(Candidate {
            node_id: node.id.clone(),
            connectivity: score.full.clone(),
            score: score.value(config.connectivity_variant),
            path_count: score.path_count,
            confidence: confident.contains(&node.id),
            selected: false,
        });
    }
    let levels: BTreeSet<&Dyadic> = candidates.iter().map(|c| &c.score).collect();
    let threshold = levels.iter().rev().nth(config.top_k.saturating_sub(1)).or(levels.first()).cloned().cloned();
    for c in &mut candidates {
        c.selected = config.select_all
            || (config.use_confidence && c.confidence)
            || (config.use_connectivity && threshold.as_ref().is_some_and(|t| c.score >= *t));
    }
    Ok(Selection { candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cve::CveId;
    use crate::network::{EdgeKind, FetchStatus, ReferenceNode};

    fn net(edges: &[(&str, &str)], patches: &[&str]) -> ReferenceNetwork {
        let cve = CveId::parse("CVE-2020-0001").unwrap();
        let mut n = ReferenceNetwork::new(&cve, 5);
        let root = n.root.clone();
        for (p, c) in edges {
            for id in [p, c] {
                let id = if *id == "root" { root.as_str() } else { id };
                let kind = if source_of(id).is_some() {
                    NodeKind::AdvisorySource
                } else if id == root {
                    NodeKind::Root
                } else if patches.contains(&id) {
                    NodeKind::Patch
                } else {
                    NodeKind::Issue
                };
                n.add_node(ReferenceNode::new(id, kind, FetchStatus::Fetched));
            }
            let p = if *p == "root" { root.as_str() } else { p };
            n.add_edge(p, c, EdgeKind::Reference);
        }
        n
    }

    #[test]
    fn single_debian_path() {
        let n = net(&[("root", "source:debian"), ("source:debian", "p")], &["p"]);
        assert_eq!(connectivity(&n, "p").unwrap().full.to_string(), "0.5");
        let paths = enumerate_paths(&n, "p").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!((paths[0].raw_length, paths[0].effective_length), (2, 2));
    }

    #[test]
    fn discount_for_nvd_and_github() {
        let n = net(&[("root", "source:nvd"), ("source:nvd", "p"), ("root", "source:github"), ("source:github", "p")], &["p"]);
        assert_eq!(connectivity(&n, "p").unwrap().full.to_string(), "2");
        assert_eq!(high_confidence_patches(&n), BTreeSet::from(["p".to_string()]));
    }

    #[test]
    fn removed_nodes_block_paths() {
        let mut n = net(&[("root", "source:debian"), ("source:debian", "p")], &["p"]);
        n.nodes.get_mut("p").unwrap().removed = true;
        assert!(connectivity(&n, "p").is_err());
        assert!(select_patches(&n, &SelectionConfig::default()).unwrap().candidates.is_empty());
    }

    #[test]
    fn ties_are_all_selected() {
        let n = net(&[("root", "source:debian"), ("source:debian", "a"), ("source:debian", "b")], &["a", "b"]);
        let s = select_patches(&n, &SelectionConfig::default()).unwrap();
        assert_eq!(s.selected_ids().len(), 2);
    }

    #[test]
    fn confidence_only_on_hybrid_patch_is_empty() {
        let n = net(&[("root", "source:debian"), ("source:debian", "h"), ("h", "p")], &["p"]);
        assert!(high_confidence_patches(&n).is_empty());
        let cfg = SelectionConfig { use_connectivity: false, ..Default::default() };
        assert!(select_patches(&n, &cfg).unwrap().selected_ids().is_empty());
    }

    #[test]
    fn top_k_keeps_more_levels() {
        let n = net(
            &[("root", "source:debian"), ("source:debian", "a"), ("source:debian", "h"), ("h", "b")],
            &["a", "b"],
        );
        assert_eq!(select_patches(&n, &SelectionConfig::default()).unwrap().selected_ids().len(), 1);
        let cfg = SelectionConfig { top_k: 2, ..Default::default() };
        assert_eq!(select_patches(&n, &cfg).unwrap().selected_ids().len(), 2);
    }

    #[test]
    fn no_heuristic_is_rejected() {
        let cfg = SelectionConfig { use_confidence: false, use_connectivity: false, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
