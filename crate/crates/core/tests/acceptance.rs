//! One PASS/FAIL line per acceptance criterion. Runs without a UI and
//! without network access: every trace replays checked-in fixtures.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{brute_force_connectivity, random_dag, world_spec, RANDOM_CVE};
use patchnet_core::dyadic::Dyadic;
use patchnet_core::evaluation::experiment::{full_grid, run_experiment};
use patchnet_core::evaluation::{parse_truth, score_cve, Cardinality, GroundTruthEntry};
use patchnet_core::extract::{classify_reference, cpe_name_match, name_match, NodeKind};
use patchnet_core::network::{build_network, BuildConfig, BuildError, ExclusionReason, FetchStatus, ReferenceNetwork};
use patchnet_core::report::{run_trace, trace, RunConfig};
use patchnet_core::selection::connectivity;
use patchnet_core::sources::{CpeEntry, Sources};
use patchnet_core::testkit::{corpus_truth, worked_example, worked_example_world, JitterTransport, CORPUS_CVES};
use patchnet_core::transport::{FixtureStore, HttpClient, ReplayTransport, TransportPolicy};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::rngs::StdRng;
use rand::SeedableRng;

const WORKED_EXAMPLE_BUDGET: Duration = Duration::from_secs(5);
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const RANDOM_DAGS: usize = 1_000;
const DAG_MAX_NODES: usize = 12;
const DAG_MAX_DEPTH: u32 = 5;
const PROPERTY_CASES: u32 = 10_000;
const SHUFFLE_SEEDS: u64 = 4;

fn fixtures(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn worked_example_end_to_end() -> Outcome {
    let (_, ex) = worked_example_world();
    let start = Instant::now();
    let config = RunConfig { transport: TransportPolicy::replay(fixtures("cve-2017-11428")), ..RunConfig::default() };
    let report = trace(&ex.cve, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let net = &report.network;

    let selected: BTreeSet<String> = report.selected.iter().map(|s| s.node_id.clone()).collect();
    ensure(selected == BTreeSet::from([ex.fix_url()]), || format!("selected {selected:?}"))?;
    let fix = connectivity(net, &ex.fix_url()).map_err(|e| e.to_string())?.full;
    ensure(fix == Dyadic::new(3u32, 1), || format!("fix connectivity {fix}"))?;
    let other = connectivity(net, &ex.samlbase_url()).map_err(|e| e.to_string())?.full;
    ensure(other == Dyadic::new(9u32, 3), || format!("SAMLBase connectivity {other}"))?;
    ensure(
        net.excluded.iter().any(|e| e.url == worked_example::GOSAML_ISSUE && e.reason == ExclusionReason::CrossRepository),
        || "gosaml2#36 not excluded as cross-repository".into(),
    )?;
    ensure(!net.contains(worked_example::GOSAML_ISSUE), || "gosaml2#36 is in the network".into())?;
    for s in &ex.saml_tests {
        let id = format!("https://github.com/crewjam/saml/commit/{s}");
        ensure(net.node(&id).is_some_and(|n| n.removed), || format!("{id} not pruned as test-only"))?;
    }
    let expanded: BTreeSet<String> = report.expanded.iter().map(|e| e.commit.commit_id.clone()).collect();
    let want: BTreeSet<String> = [&ex.backport_08, &ex.backport_09, &ex.backport_16].into_iter().cloned().collect();
    ensure(expanded == want, || format!("expanded {expanded:?}"))?;
    ensure(elapsed < WORKED_EXAMPLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("048a54 at 1.5, 482cdf at 1.125, 3 backports, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn scaled(d: &Dyadic) -> Option<u128> {
    let exp = d.exponent();
    let n: u128 = d.numerator().try_into().ok()?;
    (exp <= 32).then(|| n << (32 - exp))
}

fn connectivity_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checked = 0usize;
    for i in 0..RANDOM_DAGS {
        let net = random_dag(&mut rng, DAG_MAX_NODES, DAG_MAX_DEPTH);
        for n in net.nodes.values().filter(|n| n.kind == NodeKind::Patch && !n.removed) {
            let got = connectivity(&net, &n.id).map_err(|e| e.to_string())?.full;
            let want = brute_force_connectivity(&net, &n.id);
            ensure(scaled(&got) == Some(want), || format!("DAG {i} {}: {got} vs {want}/2^32", n.id))?;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{RANDOM_DAGS} DAGs, {checked} patches, exact, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn metric_cases() -> Outcome {
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>();
    let truths = [
        GroundTruthEntry {
            cve_id: "CVE-2020-0001".parse().unwrap(),
            cardinality: Cardinality::SP,
            equivalence_classes: vec![set(&["a", "b"])],
        },
        GroundTruthEntry {
            cve_id: "CVE-2020-0001".parse().unwrap(),
            cardinality: Cardinality::MEP,
            equivalence_classes: vec![set(&["a"]), set(&["b"])],
        },
    ];
    for t in &truths {
        for (pred, p, r) in [(set(&["a"]), 1.0, 1.0), (set(&["a", "x"]), 0.5, 1.0)] {
            let row = score_cve(&pred, t).map_err(|e| e.to_string())?;
            ensure(row.precision == p && row.recall == r, || {
                format!("{:?} {pred:?}: P={} R={}", t.cardinality, row.precision, row.recall)
            })?;
        }
    }
    Ok("{a} -> 1.0/1.0, {a,x} -> 0.5/1.0 for one class and for two alternatives".into())
}

fn ablation_directions() -> Outcome {
    let truth = parse_truth(&corpus_truth()).map_err(|e| e.to_string())?;
    ensure(truth.len() >= 10, || format!("corpus has {} CVEs", truth.len()))?;
    let store = FixtureStore::load_dir(&fixtures("corpus")).map_err(|e| e.to_string())?;
    let report = run_experiment(&truth, &full_grid(&RunConfig::default()), || Sources::new(HttpClient::replay(store.clone())));
    let checks = common::ablation_checks(&report);
    let failed: Vec<String> = checks.iter().filter(|c| !c.1).map(|(n, _, d)| format!("{n} ({d})")).collect();
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(format!("{} CVEs, {} directional checks", truth.len(), checks.len()))
}

fn determinism() -> Outcome {
    let store = FixtureStore::load_dir(&fixtures("corpus")).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for cve in CORPUS_CVES {
        let cve = cve.parse().unwrap();
        let base = run_trace(&cve, &RunConfig::default(), &Sources::new(HttpClient::replay(store.clone())))
            .map_err(|e| e.to_string())?;
        for seed in 0..SHUFFLE_SEEDS {
            let jitter = JitterTransport::new(ReplayTransport::new(store.clone()), seed, 500);
            let config = RunConfig { fetch_shuffle_seed: Some(seed), workers: Some(2 + seed as usize), ..RunConfig::default() };
            let other = run_trace(&cve, &config, &Sources::new(HttpClient::new(Arc::new(jitter)))).map_err(|e| e.to_string())?;
            ensure(other.network == base.network, || format!("{cve} seed {seed}: networks differ"))?;
            ensure(other.selected == base.selected, || format!("{cve} seed {seed}: selections differ"))?;
            ensure(other.expanded == base.expanded, || format!("{cve} seed {seed}: expansions differ"))?;
            ensure(other.canonical_without_timestamps() == base.canonical_without_timestamps(), || {
                format!("{cve} seed {seed}: canonical reports differ")
            })?;
            compared += 1;
        }
    }
    Ok(format!("{compared} shuffled replays identical to the baseline"))
}

fn runner() -> TestRunner {
    TestRunner::new(Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() })
}

/// URLs with a planted patch marker, a planted issue marker, or both.
fn planted_url() -> impl Strategy<Value = (String, bool, bool)> {
    let noise = prop_oneof![Just("news"), Just("docs"), Just("item"), Just("page"), Just("x1")];
    let patch = prop_oneof![
        ("[0-9a-f]{7,40}").prop_map(|h| ("https://github.com".to_string(), format!("commit/{h}"))),
        ("[0-9a-f]{7,40}").prop_map(|h| ("https://gitlab.com".to_string(), format!("commits/{h}"))),
        ("[0-9a-f]{7,40}").prop_map(|h| ("https://git.kernel.org".to_string(), format!("cgit/linux.git/commit?id={h}"))),
        ("[1-9][0-9]{0,6}").prop_map(|r| ("https://svn.apache.org".to_string(), format!("r{r}"))),
    ];
    let issue = prop_oneof![
        ("[A-Z]{2,5}", 1u32..99_999).prop_map(|(k, n)| format!("jira/browse/{k}-{n}")),
        (1u32..99_999).prop_map(|n| format!("issues/{n}")),
        (1u32..99_999).prop_map(|n| format!("bugs/{n}")),
    ];
    (proptest::collection::vec(noise, 0..3), proptest::option::of(patch), proptest::option::of(issue)).prop_map(
        |(noise, patch, issue)| {
            let (host, tail) = match &patch {
                Some((h, t)) => (h.clone(), Some(t.clone())),
                None => ("https://www.example.org".to_string(), None),
            };
            let mut segs: Vec<String> = noise.into_iter().map(String::from).collect();
            if let Some(i) = &issue {
                segs.push(i.clone());
            }
            if let Some(t) = tail {
                segs.push(t);
            }
            (format!("{host}/{}", segs.join("/")), patch.is_some(), issue.is_some())
        },
    )
}

fn tokens_match(a: &[String], b: &[String]) -> bool {
    // Multiset intersection by repeated removal.
    let mut rest = b.to_vec();
    let mut matched = 0;
    for t in a {
        if let Some(i) = rest.iter().position(|u| u == t) {
            rest.swap_remove(i);
            matched += 1;
        }
    }
    matched > 0 && matched >= a.len() + b.len() - 2 * matched
}

fn build(spec: &common::WorldSpec, cfg: &BuildConfig) -> Result<ReferenceNetwork, String> {
    match build_network(&RANDOM_CVE.parse().unwrap(), &spec.world().sources(), cfg) {
        Ok(n) => Ok(n),
        Err(BuildError::EmptyNetwork(n)) => Ok(*n),
        Err(e) => Err(e.to_string()),
    }
}

fn property_suites() -> Outcome {
    let mut lines = Vec::new();

    runner()
        .run(&planted_url(), |(url, patch, issue)| {
            let kind = classify_reference(&url);
            if patch {
                prop_assert_eq!(kind, NodeKind::Patch, "{}", url);
            } else if issue {
                prop_assert_eq!(kind, NodeKind::Issue, "{}", url);
            } else {
                prop_assert_eq!(kind, NodeKind::Hybrid, "{}", url);
            }
            Ok(())
        })
        .map_err(|e| format!("patch precedence: {e}"))?;
    lines.push("patch precedence");

    runner()
        .run(&(world_spec(), 2u32..8, prop::bool::weighted(0.2)), |(spec, depth, flat)| {
            let cfg = BuildConfig { depth_limit: depth, flat, ..BuildConfig::default() };
            let net = build(&spec, &cfg).map_err(TestCaseError::fail)?;
            let max = net.depths().values().copied().max().unwrap_or(0);
            prop_assert!(max <= depth, "depth {} over limit {}", max, depth);
            Ok(())
        })
        .map_err(|e| format!("depth bound: {e}"))?;
    lines.push("depth bound");

    runner()
        .run(&world_spec(), |spec| {
            let net = build(&spec, &BuildConfig::default()).map_err(TestCaseError::fail)?;
            for (i, item) in spec.items.iter().enumerate().filter(|(_, it)| it.kind == 0) {
                let Some(node) = net.node(&item.url(i)) else { continue };
                let fetched = node.fetch_status == FetchStatus::Fetched;
                prop_assert_eq!(node.removed, fetched && item.test_only, "{}", node.id);
            }
            Ok(())
        })
        .map_err(|e| format!("prune soundness: {e}"))?;
    lines.push("prune soundness");

    let word = prop_oneof![Just("saml"), Just("ruby"), Just("lib"), Just("php"), Just("core"), Just("x")];
    let name = proptest::collection::vec(word, 1..5).prop_map(|v| v.into_iter().map(String::from).collect::<Vec<_>>());
    let sep = prop_oneof![Just("-"), Just("_"), Just(".")];
    runner()
        .run(&(name.clone(), name.clone(), name.clone(), name, sep.clone(), sep), |(o, r, v, p, s1, s2)| {
            let (o, r, v, p) = (o.join(s1), r.join(s2), v.join(s2), p.join(s1));
            prop_assert_eq!(name_match(&o, &v), name_match(&v, &o));
            let oracle = |a: &str, b: &str| {
                let t = |s: &str| s.split(['-', '_', '.']).map(String::from).collect::<Vec<_>>();
                tokens_match(&t(a), &t(b))
            };
            prop_assert_eq!(name_match(&o, &v), oracle(&o, &v));
            let forward = CpeEntry::new(&v, &p).map(|c| cpe_name_match(&o, &r, &[c]));
            let backward = CpeEntry::new(&o, &r).map(|c| cpe_name_match(&v, &p, &[c]));
            prop_assert_eq!(forward, backward);
            Ok(())
        })
        .map_err(|e| format!("CPE symmetry: {e}"))?;
    lines.push("CPE symmetry");

    Ok(format!("{} x {PROPERTY_CASES} cases: {}", lines.len(), lines.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 6] = [
        ("worked example end to end", worked_example_end_to_end),
        ("connectivity equals path enumeration", connectivity_oracle),
        ("metric worked cases", metric_cases),
        ("ablation directions on the mini-corpus", ablation_directions),
        ("determinism under shuffled scheduling", determinism),
        ("classification and filter properties", property_suites),
    ];
    let mut failures = BTreeMap::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failures.insert(name, detail);
            }
        }
    }
    if !failures.is_empty() {
        std::process::exit(1);
    }
}
