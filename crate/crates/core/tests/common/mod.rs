//! Generators shared by the property suites and the acceptance target.
#![allow(dead_code)]

use std::collections::BTreeSet;

use patchnet_core::cve::CveId;
use patchnet_core::evaluation::experiment::{ExperimentReport, VariantResult};
use patchnet_core::extract::NodeKind;
use patchnet_core::network::{root_id, source_node_id, EdgeKind, FetchStatus, ReferenceNetwork, ReferenceNode};
use patchnet_core::sources::SourceId;
use patchnet_core::testkit::{sha, SyntheticCommit, World};
use proptest::prelude::*;
use rand::Rng;

pub const RANDOM_CVE: &str = "CVE-2020-4321";
const CPE: &str = "cpe:2.3:a:org:proj:*:*:*:*:*:*:*:*";

/// A random network: root, a non-empty subset of the four sources, then up
/// to `max_nodes` reference nodes in topological order, at most `max_depth`
/// edges below the root. Patches are leaves; some are removed.
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize, max_depth: u32) -> ReferenceNetwork {
    let cve: CveId = RANDOM_CVE.parse().unwrap();
    let mut net = ReferenceNetwork::new(&cve, max_depth);
    let root = root_id(&cve);
    let mut depth: Vec<(String, u32, NodeKind)> = Vec::new();
    for s in SourceId::ALL {
        if depth.is_empty() || rng.random_bool(0.7) {
            let id = source_node_id(s);
            net.add_node(ReferenceNode::new(id.clone(), NodeKind::AdvisorySource, FetchStatus::Fetched));
            net.add_edge(&root, &id, EdgeKind::Reference);
            depth.push((id, 1, NodeKind::AdvisorySource));
        }
    }
    let n = rng.random_range(1..=max_nodes);
    for i in 0..n {
        let kind = match rng.random_range(0..3) {
            0 => NodeKind::Patch,
            1 => NodeKind::Issue,
            _ => NodeKind::Hybrid,
        };
        let parents: Vec<usize> = (0..depth.len())
            .filter(|&j| {
                let (_, d, k) = &depth[j];
                *d < max_depth
                    && *k != NodeKind::Patch
                    && match kind {
                        NodeKind::Hybrid => *k == NodeKind::AdvisorySource,
                        _ => true,
                    }
            })
            .collect();
        if parents.is_empty() {
            continue;
        }
        let id = format!("https://n.example/{i}");
        let mut node = ReferenceNode::new(id.clone(), kind, FetchStatus::Fetched);
        node.removed = kind == NodeKind::Patch && rng.random_bool(0.15);
        net.add_node(node);
        let first = parents[rng.random_range(0..parents.len())];
        let mut chosen = BTreeSet::from([first]);
        for &p in &parents {
            if rng.random_bool(0.3) {
                chosen.insert(p);
            }
        }
        let d = chosen.iter().map(|&p| depth[p].1).min().unwrap() + 1;
        for p in chosen {
            net.add_edge(&depth[p].0.clone(), &id, EdgeKind::Reference);
        }
        depth.push((id, d, kind));
    }
    net
}

/// Brute-force connectivity, scaled by `2^32`: enumerate every root-to-patch
/// walk and add `2^(1 - L)` per path, where `L` is one less than the edge
/// count when the walk starts at the NVD or GitHub node.
pub fn brute_force_connectivity(net: &ReferenceNetwork, patch: &str) -> u128 {
    fn walk(net: &ReferenceNetwork, at: &str, target: &str, path: &mut Vec<String>, total: &mut u128) {
        if at == target {
            let edges = (path.len() - 1) as u32;
            let discounted = matches!(path[1].as_str(), "source:nvd" | "source:github");
            let l = if discounted { edges - 1 } else { edges };
            *total += 1u128 << (33 - l);
            return;
        }
        for e in &net.edges {
            if e.parent != at || e.kind != EdgeKind::Reference {
                continue;
            }
            if net.nodes[&e.child].removed || path.contains(&e.child) {
                continue;
            }
            path.push(e.child.clone());
            walk(net, &e.child, target, path, total);
            path.pop();
        }
    }
    let mut total = 0;
    walk(net, &net.root, patch, &mut vec![net.root.clone()], &mut total);
    total
}

/// Shape of a generated upstream world.
#[derive(Debug, Clone)]
pub struct WorldSpec {
    pub items: Vec<Item>,
    pub nvd_refs: Vec<usize>,
    pub debian_refs: Option<Vec<usize>>,
    pub redhat_refs: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Item {
    pub kind: u8,
    pub links: Vec<usize>,
    pub test_only: bool,
    pub mentions_cve: bool,
    pub fails: bool,
}

impl Item {
    pub fn url(&self, i: usize) -> String {
        match self.kind {
            0 => format!("https://github.com/org/proj/commit/{}", sha(&format!("{i:02x}"))),
            1 => format!("https://tracker.example.org/issues/{i}"),
            2 => format!("https://github.com/org/proj/issues/{i}"),
            _ => format!("https://news.example.com/post-{i}"),
        }
    }
}

fn item() -> impl Strategy<Value = Item> {
    (0u8..4, proptest::collection::vec(0usize..16, 0..4), any::<bool>(), prop::bool::weighted(0.2), prop::bool::weighted(0.05))
        .prop_map(|(kind, links, test_only, mentions_cve, fails)| Item { kind, links, test_only, mentions_cve, fails })
}

pub fn world_spec() -> impl Strategy<Value = WorldSpec> {
    proptest::collection::vec(item(), 1..16).prop_flat_map(|items| {
        let n = items.len();
        let refs = proptest::collection::vec(0..n, 0..4);
        (
            Just(items),
            refs.clone(),
            proptest::option::of(refs.clone()),
            proptest::option::of(refs),
        )
            .prop_map(|(mut items, nvd_refs, debian_refs, redhat_refs)| {
                let n = items.len();
                for it in &mut items {
                    it.links.retain(|&l| l < n);
                }
                WorldSpec { items, nvd_refs, debian_refs, redhat_refs }
            })
    })
}

impl WorldSpec {
    pub fn world(&self) -> World {
        let mut w = World::new();
        let urls: Vec<String> = self.items.iter().enumerate().map(|(i, it)| it.url(i)).collect();
        let refs = |ix: &[usize]| ix.iter().map(|&i| urls[i].clone()).collect::<Vec<_>>();
        let nvd = refs(&self.nvd_refs);
        w.nvd(RANDOM_CVE, &nvd.iter().map(String::as_str).collect::<Vec<_>>(), &[CPE]);
        if let Some(d) = &self.debian_refs {
            let d = refs(d);
            w.debian(RANDOM_CVE, &d.iter().map(String::as_str).collect::<Vec<_>>());
        }
        if let Some(r) = &self.redhat_refs {
            let comments: Vec<String> = refs(r).into_iter().map(|u| format!("see {u}")).collect();
            let comments: Vec<&str> = comments.iter().map(String::as_str).collect();
            w.redhat(RANDOM_CVE, &[(42, &comments)]);
        }
        w.repo("org", "proj", "master");
        for (i, it) in self.items.iter().enumerate() {
            if it.kind == 0 {
                let msg = if it.mentions_cve { format!("Fix {RANDOM_CVE}") } else { format!("Change {i}") };
                let path = if it.test_only { "tests/check_test.c" } else { "src/lib.c" };
                let at = format!("2020-0{}-01T00:00:00Z", 1 + i % 9);
                w.commit(SyntheticCommit::new("org", "proj", &sha(&format!("{i:02x}")), &msg, &[path], &at), &["master"]);
            } else {
                let links: Vec<String> = refs(&it.links);
                let body: String = links.iter().map(|u| format!("<a href=\"{u}\">x</a>\n")).collect();
                w.page(&urls[i], &format!("<html><body>{body}</body></html>"));
            }
            if it.fails {
                w.fail(&urls[i]);
            }
        }
        w
    }
}

const EPS: f64 = 1e-9;

fn total(report: &ExperimentReport, name: &str) -> (usize, f64, f64) {
    let t = report.variant(name).unwrap_or_else(|| panic!("variant {name}")).table.total();
    (t.not_found, t.precision.unwrap_or(0.0), t.recall.unwrap_or(0.0))
}

fn label_recall(report: &ExperimentReport, name: &str, label: &str) -> f64 {
    report.variant(name).and_then(|v| v.table.row(label)).and_then(|r| r.recall).unwrap_or(0.0)
}

/// Direction of every ablation on the corpus, as `(check, passed, detail)`.
pub fn ablation_checks(report: &ExperimentReport) -> Vec<(String, bool, String)> {
    let mut out = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| out.push((name.to_string(), ok, detail));
    let base = total(report, "base");
    let we = report.variant("base").and_then(|v| v.row("CVE-2017-11428")).expect("worked example row");
    check(
        "base scores the worked example exactly",
        !we.not_found && (we.precision - 1.0).abs() < EPS && (we.recall - 1.0).abs() < EPS,
        format!("P={} R={}", we.precision, we.recall),
    );

    // Averages cover found rows only, so more misses can lift them.
    let worse = |v: (usize, f64, f64)| {
        v.0 > base.0 || (v.0 == base.0 && v.1 <= base.1 + EPS && v.2 <= base.2 + EPS && (v.1 < base.1 - EPS || v.2 < base.2 - EPS))
    };
    for i in 1..=4 {
        let name = format!("v1^{i}");
        let v = total(report, &name);
        check(&format!("{name} (drop one source) is worse than base"), worse(v), format!("{v:?} vs {base:?}"));
    }
    let flat = total(report, "v1^5");
    check("v1^5 (flat) misses more CVEs", flat.0 > base.0, format!("{} vs {}", flat.0, base.0));

    let all = total(report, "v2^1");
    check("v2^1 (select all) lowers precision", all.1 < base.1 - EPS, format!("{} vs {}", all.1, base.1));
    let no_conn = total(report, "v2^2");
    check("v2^2 (no connectivity) misses more CVEs", no_conn.0 > base.0, format!("{} vs {}", no_conn.0, base.0));
    for name in ["v2^3", "v2^4"] {
        let v = total(report, name);
        check(&format!("{name} is no better than base"), v.0 >= base.0 && v.1 <= base.1 + EPS && v.2 <= base.2 + EPS, format!("{v:?} vs {base:?}"));
    }
    let num = total(report, "v2^5");
    check("v2^5 (path number only) lowers precision", num.1 < base.1 - EPS, format!("{} vs {}", num.1, base.1));

    let no_exp = total(report, "v3");
    let (mb, mb3) = (label_recall(report, "base", "MB"), label_recall(report, "v3", "MB"));
    check(
        "v3 (no expansion) lowers MB recall and keeps the not-found count",
        mb3 < mb - EPS && no_exp.0 == base.0,
        format!("MB recall {mb3} vs {mb}, not found {} vs {}", no_exp.0, base.0),
    );

    let depth: Vec<usize> = (3..=6).map(|d| total(report, &format!("depth={d}")).0).collect();
    check(
        "not-found count never rises with depth and depth 3 misses more than depth 5",
        depth.windows(2).all(|w| w[1] <= w[0]) && depth[0] > depth[2],
        format!("{depth:?}"),
    );

    let spans: Vec<&VariantResult> = (0..=60).step_by(10).map(|s| report.variant(&format!("span={s}")).expect("span variant")).collect();
    let mut monotone = true;
    let mut detail = String::new();
    for pair in spans.windows(2) {
        for r in &pair[0].rows {
            let next = pair[1].row(r.cve_id.as_str()).expect("same dataset");
            if !r.not_found && !next.not_found && next.recall < r.recall - EPS {
                monotone = false;
                detail = format!("{} {} -> {}: {} -> {}", r.cve_id, pair[0].name, pair[1].name, r.recall, next.recall);
            }
        }
    }
    let (r0, r60) = (spans[0].table.total().recall.unwrap_or(0.0), spans[6].table.total().recall.unwrap_or(0.0));
    check(
        "recall per CVE never falls as the span grows and span 60 beats span 0",
        monotone && r60 > r0 + EPS,
        if detail.is_empty() { format!("total recall {r0} -> {r60}") } else { detail },
    );
    out
}
