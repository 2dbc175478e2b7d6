//! Graph exports: DOT text and the structured JSON network.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::TraceReport;
use crate::extract::{github_repo, NodeKind};
use crate::network::{EdgeKind, ExclusionReason, ReferenceNetwork, ReferenceNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFormat {
    Dot,
    Json,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(GraphFormat::Dot),
            "json" | "structured" => Ok(GraphFormat::Json),
            other => Err(format!("unknown graph format {other:?}")),
        }
    }
}

pub fn export_graph(report: &TraceReport, format: GraphFormat) -> String {
    match format {
        GraphFormat::Dot => to_dot(&report.network),
        GraphFormat::Json => to_structured(&report.network),
    }
}

pub fn to_structured(network: &ReferenceNetwork) -> String {
    serde_json::to_string_pretty(network).expect("network serializes")
}

pub fn from_structured(text: &str) -> Result<ReferenceNetwork, serde_json::Error> {
    serde_json::from_str(text)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Short display label: `repo@abcdef0`, `repo#12`, source names, or the URL.
pub fn node_label(node: &ReferenceNode) -> String {
    if let Some(s) = node.source() {
        return s.display_name().to_string();
    }
    match node.kind {
        NodeKind::Root => node.id.trim_start_matches("cve:").to_string(),
        NodeKind::Patch => node.commit.as_ref().map(|c| c.short_label()).unwrap_or_else(|| node.id.clone()),
        _ => url_label(&node.id),
    }
}

fn url_label(url: &str) -> String {
    if let Some((_, repo)) = github_repo(url) {
        let tail = url.rsplit('/').next().unwrap_or_default();
        if url.contains("/issues/") || url.contains("/pull/") {
            return format!("{repo}#{tail}");
        }
    }
    url.trim_start_matches("https://").trim_start_matches("http://").to_string()
}

fn style(kind: NodeKind) -> (&'static str, &'static str) {
    match kind {
        NodeKind::Root => ("doubleoctagon", "black"),
        NodeKind::AdvisorySource => ("box", "blue"),
        NodeKind::Patch => ("ellipse", "red"),
        NodeKind::Issue => ("diamond", "darkgreen"),
        NodeKind::Hybrid => ("hexagon", "purple"),
    }
}

/// Deterministic DOT rendering. Nodes are grouped per depth with
/// `rank=same`; removed patches and excluded references are dashed;
/// expansion edges are bold and labelled.
pub fn to_dot(network: &ReferenceNetwork) -> String {
    let depths = network.depths();
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(network.cve_id.as_str()));
    let _ = writeln!(out, "  rankdir=TB;");
    for node in network.nodes.values() {
        let (shape, color) = style(node.kind);
        let dashed = if node.removed { ", style=dashed" } else { "" };
        let _ = writeln!(
            out,
            "  {} [label={}, kind={}, shape={shape}, color={color}{dashed}];",
            quote(&node.id),
            quote(&node_label(node)),
            quote(&node.kind.to_string())
        );
    }
    for ex in &network.excluded {
        if ex.reason == ExclusionReason::CrossRepository && !network.contains(&ex.url) {
            let _ = writeln!(
                out,
                "  {} [label={}, kind=\"excluded\", shape=diamond, color=gray, style=dashed];",
                quote(&ex.url),
                quote(&url_label(&ex.url))
            );
        }
    }
    let mut layers: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (id, d) in &depths {
        layers.entry(*d).or_default().push(id);
    }
    for (d, ids) in &layers {
        let list: Vec<String> = ids.iter().map(|i| quote(i)).collect();
        let _ = writeln!(out, "  {{ rank=same; /* depth {d} */ {}; }}", list.join("; "));
    }
    for e in &network.edges {
        let removed = network.node(&e.child).is_some_and(|n| n.removed);
        let attrs = match (e.kind, removed) {
            (EdgeKind::Expansion, _) => " [label=\"expansion\", style=bold]",
            (EdgeKind::Reference, true) => " [style=dashed]",
            (EdgeKind::Reference, false) => "",
        };
        let _ = writeln!(out, "  {} -> {}{attrs};", quote(&e.parent), quote(&e.child));
    }
    for ex in &network.excluded {
        let reason = match ex.reason {
            ExclusionReason::CrossRepository => "cross-repository",
            ExclusionReason::Cycle => "cycle",
        };
        let _ = writeln!(
            out,
            "  {} -> {} [style=dashed, color=gray, label={}];",
            quote(&ex.parent),
            quote(&ex.url),
            quote(reason)
        );
    }
    out.push_str("}\n");
    out
}
