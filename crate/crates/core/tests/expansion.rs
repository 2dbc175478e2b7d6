use std::collections::BTreeSet;

use chrono::Duration;
use patchnet_core::expansion::{expand_patch, ExpansionConfig, MatchKind};
use patchnet_core::extract::TrackingIdentifier;
use patchnet_core::network::{build_network, BuildConfig, EdgeKind};
use patchnet_core::report::{run_trace, RunConfig};
use patchnet_core::testkit::{corpus_world, sha, worked_example_world, World, CORPUS_CVES, SVN_REVISION};

fn expanded_ids(world: &World, cve: &str, span: u32) -> BTreeSet<String> {
    let config = RunConfig { span_days: span, ..RunConfig::default() };
    let report = run_trace(&cve.parse().unwrap(), &config, &world.sources()).unwrap();
    report.expanded.iter().map(|e| e.commit.commit_id.clone()).collect()
}

#[test]
fn worked_example_backports() {
    let (w, ex) = worked_example_world();
    let mut net = build_network(&ex.cve, &w.sources(), &BuildConfig::default()).unwrap();
    let ids = vec![TrackingIdentifier::cve(&ex.cve)];
    let out = expand_patch(&mut net, &ex.fix_url(), &ExpansionConfig::default(), &ids, &w.sources());
    let got: BTreeSet<&str> = out.patches.iter().map(|p| p.commit.commit_id.as_str()).collect();
    let want: BTreeSet<&str> = [&ex.backport_08, &ex.backport_09, &ex.backport_16].iter().map(|s| s.as_str()).collect();
    assert_eq!(got, want);
    let by_branch: Vec<(&str, usize)> = out.patches.iter().map(|p| (p.branches[0].as_str(), p.branches.len())).collect();
    assert_eq!(by_branch, vec![("0.8.10", 15), ("v0.9.3", 1), ("v1.6.2", 1)]);
    assert!(out.patches.iter().all(|p| p.matched_by == MatchKind::MessageRelation && p.parent_patch == ex.fix_url()));
    for p in &out.patches {
        assert!(net.edges.iter().any(|e| e.parent == ex.fix_url() && e.child == p.commit.url && e.kind == EdgeKind::Expansion));
    }
    net.validate().unwrap();
    assert!(!got.contains(ex.fix.as_str()));
}

#[test]
fn disabled_expansion_does_nothing() {
    let (w, ex) = worked_example_world();
    let mut net = build_network(&ex.cve, &w.sources(), &BuildConfig::default()).unwrap();
    let before = net.clone();
    let cfg = ExpansionConfig { enabled: false, ..ExpansionConfig::default() };
    let out = expand_patch(&mut net, &ex.fix_url(), &cfg, &[], &w.sources());
    assert!(out.patches.is_empty());
    assert_eq!(net, before);
}

#[test]
fn svn_patches_are_not_expanded() {
    let w = corpus_world();
    let report = run_trace(&"CVE-2019-10011".parse().unwrap(), &RunConfig::default(), &w.sources()).unwrap();
    assert!(report.expanded.is_empty());
    assert!(report.notes.iter().any(|n| n.starts_with("expansion skipped: non-GitHub") && n.contains(SVN_REVISION)));
    assert_eq!(report.predicted_commits(), [SVN_REVISION.to_string()].into_iter().collect());
}

#[test]
fn span_edges() {
    let w = corpus_world();
    assert!(expanded_ids(&w, "CVE-2019-10006", 0).is_empty());
    assert_eq!(expanded_ids(&w, "CVE-2019-10006", 10), BTreeSet::from([sha("f2f2f2")]));
    assert_eq!(expanded_ids(&w, "CVE-2019-10007", 30), BTreeSet::from([sha("a0a0a2")]));
    assert_eq!(expanded_ids(&w, "CVE-2019-10007", 40), BTreeSet::from([sha("a0a0a2"), sha("a0a0a3")]));
}

#[test]
fn identifier_mention_is_labelled() {
    let w = corpus_world();
    let report = run_trace(&"CVE-2019-10006".parse().unwrap(), &RunConfig::default(), &w.sources()).unwrap();
    assert_eq!(report.expanded.len(), 1);
    assert_eq!(report.expanded[0].matched_by, MatchKind::IdentifierMention);
}

#[test]
fn expanded_sets_grow_with_span() {
    let w = corpus_world();
    for cve in CORPUS_CVES {
        let mut prev = BTreeSet::new();
        for span in (0..=60).step_by(10) {
            let cur = expanded_ids(&w, cve, span);
            assert!(prev.is_subset(&cur), "{cve} span {span}");
            prev = cur;
        }
    }
}

#[test]
fn expanded_commits_lie_inside_the_window() {
    let (w, ex) = worked_example_world();
    let report = run_trace(&ex.cve, &RunConfig { span_days: 1, ..RunConfig::default() }, &w.sources()).unwrap();
    let center = report.network.nodes[&ex.fix_url()].detail.as_ref().unwrap().committed_at.unwrap();
    for e in &report.expanded {
        let t = e.committed_at.unwrap();
        assert!(t >= center - Duration::days(1) && t <= center + Duration::days(1));
    }
    let got: BTreeSet<&str> = report.expanded.iter().map(|e| e.commit.commit_id.as_str()).collect();
    assert_eq!(got, BTreeSet::from([ex.backport_16.as_str()]));
}
