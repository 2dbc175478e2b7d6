//! Implementations of the non-server subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patchnet_core::cve::CveId;
use patchnet_core::evaluation::experiment::{
    ablation_grid, depth_grid, evaluate_one, full_grid, run_experiment, span_grid, Variant,
};
use patchnet_core::evaluation::{aggregate, read_truth_file, ScoreRow};
use patchnet_core::report::export::{export_graph, GraphFormat};
use patchnet_core::report::{run_trace, ReportStore, RunConfig, TraceReport, TraceStatus, STORE_CONFIG};
use patchnet_core::sources::Sources;
use patchnet_core::transport::HttpClient;

use crate::args::{ExportFormat, Grid};

pub const EXIT_FOUND: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_SOURCE_FAILURE: i32 = 3;

fn client(config: &RunConfig) -> Result<HttpClient> {
    HttpClient::from_policy(&config.transport).context("setting up transport")
}

/// Stores the run configuration for queued traces unless one exists.
fn remember_config(store: &ReportStore, config: &RunConfig) -> Result<()> {
    if !store.root().join(STORE_CONFIG).exists() {
        store.save_config(config)?;
    }
    Ok(())
}

fn summary(report: &TraceReport) -> String {
    let mut out = format!("{} {}\n", report.cve_id, if report.status == TraceStatus::Found { "found" } else { "not found" });
    for s in &report.selected {
        out.push_str(&format!("  selected  {}  connectivity={}{}\n", s.node_id, s.connectivity, if s.confidence { "  confidence" } else { "" }));
    }
    for e in &report.expanded {
        out.push_str(&format!("  expanded  {}  branches={}\n", e.commit.url, e.branches.join(",")));
    }
    for (source, status) in &report.network.sources {
        if let patchnet_core::network::SourceStatus::Unavailable(msg) = status {
            out.push_str(&format!("  source {source} unavailable: {msg}\n"));
        }
    }
    out
}

pub fn trace(store: &Path, cve: &str, config: &RunConfig, json: bool) -> Result<i32> {
    let cve = CveId::parse(cve)?;
    let store = ReportStore::open(store)?;
    let http = client(config)?;
    let report = run_trace(&cve, config, &Sources::new(http))?;
    let report = store.save_trace(report)?;
    remember_config(&store, config)?;
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", report.to_canonical_json())?;
    } else {
        write!(out, "{}", summary(&report))?;
    }
    Ok(report.exit_code())
}

pub fn read_cve_list(path: &Path) -> Result<Vec<CveId>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        out.push(CveId::parse(line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn batch(store: &Path, file: &Path, config: &RunConfig) -> Result<i32> {
    let cves = read_cve_list(file)?;
    let store = ReportStore::open(store)?;
    let http = client(config)?;
    remember_config(&store, config)?;
    let (mut missing, mut failing) = (false, false);
    let mut out = std::io::stdout().lock();
    for cve in cves {
        match run_trace(&cve, config, &Sources::new(http.fresh())) {
            Ok(report) => {
                let report = store.save_trace(report)?;
                missing |= report.status == TraceStatus::NotFound;
                failing |= report.has_source_failure();
                write!(out, "{}", summary(&report))?;
            }
            Err(e) => {
                failing = true;
                writeln!(out, "{cve} error: {e}")?;
            }
        }
    }
    Ok(if failing {
        EXIT_SOURCE_FAILURE
    } else if missing {
        EXIT_NOT_FOUND
    } else {
        EXIT_FOUND
    })
}

fn print_rows(out: &mut impl Write, rows: &[ScoreRow]) -> Result<()> {
    writeln!(out, "{:<16} {:<4} {:>5} {:>5} {:>5} {:>7} {:>7} {:>7}", "CVE", "Card", "TP", "FP", "FN", "Pre.", "Rec.", "F1")?;
    for r in rows {
        writeln!(
            out,
            "{:<16} {:<4} {:>5} {:>5} {:>5} {:>7.3} {:>7.3} {:>7.3}{}",
            r.cve_id.as_str(),
            r.cardinality.to_string(),
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            r.precision,
            r.recall,
            r.f1,
            if r.not_found { "  not found" } else { "" }
        )?;
    }
    Ok(())
}

pub fn evaluate(truth: &Path, config: &RunConfig, json: bool) -> Result<i32> {
    let dataset = read_truth_file(truth)?;
    let http = client(config)?;
    let rows: Vec<ScoreRow> = dataset.iter().map(|t| evaluate_one(t, config, &Sources::new(http.fresh()))).collect();
    let table = aggregate(&rows);
    let mut out = std::io::stdout().lock();
    if json {
        let body = serde_json::json!({"rows": rows, "table": table});
        writeln!(out, "{}", serde_json::to_string_pretty(&body)?)?;
    } else {
        print_rows(&mut out, &rows)?;
        writeln!(out)?;
        write!(out, "{table}")?;
    }
    Ok(EXIT_FOUND)
}

pub fn grid(kind: Grid, base: &RunConfig) -> Vec<Variant> {
    match kind {
        Grid::Ablation => ablation_grid(base),
        Grid::Depth => depth_grid(base, 3..=6),
        Grid::Span => span_grid(base, (0..=60).step_by(10)),
        Grid::Full => full_grid(base),
    }
}

pub fn sweep(truth: &Path, kind: Grid, config: &RunConfig, json: bool) -> Result<i32> {
    let dataset = read_truth_file(truth)?;
    let http = client(config)?;
    let report = run_experiment(&dataset, &grid(kind, config), || Sources::new(http.fresh()));
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        for v in &report.variants {
            writeln!(out, "== {}", v.name)?;
            write!(out, "{}", v.table)?;
            writeln!(out)?;
        }
    }
    Ok(EXIT_FOUND)
}

pub fn export(store: &Path, cve: &str, format: ExportFormat, output: Option<&Path>) -> Result<i32> {
    let cve = CveId::parse(cve)?;
    let store = ReportStore::open(store)?;
    if !store.contains(&cve) {
        bail!("no report for {cve} in {}", store.root().display());
    }
    let report = store.load(&cve)?;
    let format = match format {
        ExportFormat::Dot => GraphFormat::Dot,
        ExportFormat::Json => GraphFormat::Json,
    };
    let text = export_graph(&report, format);
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(EXIT_FOUND)
}
