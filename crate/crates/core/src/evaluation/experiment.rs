//! Ablation and sensitivity runs: the full pipeline per CVE per
//! configuration, scored into one aggregate table each.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, failed_row, score_cve, AggregateTable, GroundTruthEntry, ScoreRow};
use crate::report::{run_trace, ConfigSnapshot, RunConfig};
use crate::selection::ConnectivityVariant;
use crate::sources::{SourceId, Sources};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub name: String,
    pub config: RunConfig,
}

impl Variant {
    pub fn new(name: impl Into<String>, config: RunConfig) -> Self {
        Variant { name: name.into(), config }
    }
}

fn without(base: &RunConfig, source: SourceId) -> RunConfig {
    let mut c = base.clone();
    c.sources.remove(&source);
    c
}

/// The base configuration and the twelve ablation variants.
pub fn ablation_grid(base: &RunConfig) -> Vec<Variant> {
    let mut out = vec![Variant::new("base", base.clone())];
    for (i, s) in [SourceId::Nvd, SourceId::Debian, SourceId::RedHat, SourceId::GitHub].into_iter().enumerate() {
        out.push(Variant::new(format!("v1^{}", i + 1), without(base, s)));
    }
    let mut flat = base.clone();
    flat.flat = true;
    out.push(Variant::new("v1^5", flat));

    let mut all = base.clone();
    all.selection.select_all = true;
    out.push(Variant::new("v2^1", all));
    let mut no_conn = base.clone();
    no_conn.selection.use_connectivity = false;
    out.push(Variant::new("v2^2", no_conn));
    let mut no_conf = base.clone();
    no_conf.selection.use_confidence = false;
    out.push(Variant::new("v2^3", no_conf));
    let mut len = base.clone();
    len.selection.connectivity_variant = ConnectivityVariant::PathLengthOnly;
    out.push(Variant::new("v2^4", len));
    let mut num = base.clone();
    num.selection.connectivity_variant = ConnectivityVariant::PathNumberOnly;
    out.push(Variant::new("v2^5", num));

    let mut no_exp = base.clone();
    no_exp.expansion_enabled = false;
    out.push(Variant::new("v3", no_exp));
    out
}

pub fn depth_grid(base: &RunConfig, depths: impl IntoIterator<Item = u32>) -> Vec<Variant> {
    depths
        .into_iter()
        .map(|d| {
            let mut c = base.clone();
            c.depth_limit = d;
            Variant::new(format!("depth={d}"), c)
        })
        .collect()
}

pub fn span_grid(base: &RunConfig, spans: impl IntoIterator<Item = u32>) -> Vec<Variant> {
    spans
        .into_iter()
        .map(|s| {
            let mut c = base.clone();
            c.span_days = s;
            Variant::new(format!("span={s}"), c)
        })
        .collect()
}

/// Ablations, depth 3 to 6 and span 0 to 60 in steps of 10.
pub fn full_grid(base: &RunConfig) -> Vec<Variant> {
    let mut g = ablation_grid(base);
    g.extend(depth_grid(base, 3..=6));
    g.extend(span_grid(base, (0..=60).step_by(10)));
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub name: String,
    pub config: ConfigSnapshot,
    pub rows: Vec<ScoreRow>,
    pub table: AggregateTable,
}

impl VariantResult {
    pub fn row(&self, cve: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.cve_id.as_str() == cve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variants: Vec<VariantResult>,
}

impl ExperimentReport {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Scores one CVE under one configuration. A failed trace counts as not
/// found.
pub fn evaluate_one(truth: &GroundTruthEntry, config: &RunConfig, sources: &Sources) -> ScoreRow {
    match run_trace(&truth.cve_id, config, sources) {
        Ok(report) => {
            let predicted: BTreeSet<String> = report.predicted_commits();
            score_cve(&predicted, truth).unwrap_or_else(|e| failed_row(truth, e.to_string()))
        }
        Err(e) => failed_row(truth, e.to_string()),
    }
}

/// `sources` is called once per (variant, CVE) so fetch logs stay per run.
pub fn run_experiment<F>(dataset: &[GroundTruthEntry], grid: &[Variant], sources: F) -> ExperimentReport
where
    F: Fn() -> Sources + Sync,
{
    let variants = grid
        .iter()
        .map(|v| {
            let rows: Vec<ScoreRow> = dataset.par_iter().map(|t| evaluate_one(t, &v.config, &sources())).collect();
            VariantResult { name: v.name.clone(), config: v.config.snapshot(), table: aggregate(&rows), rows }
        })
        .collect();
    ExperimentReport { variants }
}
