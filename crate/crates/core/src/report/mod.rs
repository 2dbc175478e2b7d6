//! Trace orchestration and the persisted trace report.

pub mod export;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use store::{AuditAction, AuditEntry, ReportStore, ReportSummary, StoreError, STORE_CONFIG};

use crate::cve::CveId;
use crate::dyadic::Dyadic;
use crate::expansion::{expand_patch, ExpandedPatch, ExpansionConfig};
use crate::extract::{SourceExtensions, TrackingIdentifier};
use crate::network::{build_network, BuildConfig, BuildError, ReferenceNetwork, SourceStatus};
use crate::selection::{enumerate_paths, select_patches, Candidate, PathRecord, SelectionConfig, SelectionError};
use crate::sources::{SourceId, Sources};
use crate::transport::{FetchLogEntry, HttpClient, TransportError, TransportMode, TransportPolicy};

pub const REPORT_SCHEMA: &str = "patchnet.report/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub depth_limit: u32,
    pub span_days: u32,
    pub sources: BTreeSet<SourceId>,
    #[serde(default)]
    pub flat: bool,
    #[serde(default)]
    pub selection: SelectionConfig,
    pub expansion_enabled: bool,
    #[serde(default)]
    pub transport: TransportPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub extensions: SourceExtensions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_shuffle_seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            depth_limit: 5,
            span_days: 30,
            sources: SourceId::ALL.into_iter().collect(),
            flat: false,
            selection: SelectionConfig::default(),
            expansion_enabled: true,
            transport: TransportPolicy::default(),
            output_dir: None,
            extensions: SourceExtensions::default(),
            workers: None,
            fetch_shuffle_seed: None,
        }
    }
}

impl RunConfig {
    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            depth_limit: self.depth_limit,
            enabled_sources: self.sources.clone(),
            flat: self.flat,
            extensions: self.extensions.clone(),
            workers: self.workers,
            fetch_shuffle_seed: self.fetch_shuffle_seed,
        }
    }

    pub fn expansion_config(&self) -> ExpansionConfig {
        ExpansionConfig { span_days: self.span_days, enabled: self.expansion_enabled }
    }

    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            depth_limit: self.depth_limit,
            span_days: self.span_days,
            sources: self.sources.clone(),
            flat: self.flat,
            selection: self.selection.clone(),
            expansion_enabled: self.expansion_enabled,
            transport_mode: self.transport.mode,
        }
    }
}

/// The parts of a run configuration that can change a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub depth_limit: u32,
    pub span_days: u32,
    pub sources: BTreeSet<SourceId>,
    pub flat: bool,
    pub selection: SelectionConfig,
    pub expansion_enabled: bool,
    pub transport_mode: TransportMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Found,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedPatch {
    pub node_id: String,
    pub connectivity: Dyadic,
    pub confidence: bool,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confirmed,
    Rejected,
    Unreviewed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub patch_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub reviewer: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub schema: String,
    pub cve_id: CveId,
    pub generated_at: DateTime<Utc>,
    pub status: TraceStatus,
    pub config: ConfigSnapshot,
    pub network: ReferenceNetwork,
    /// Every scored patch, selected or not.
    pub candidates: Vec<Candidate>,
    pub selected: Vec<SelectedPatch>,
    pub expanded: Vec<ExpandedPatch>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub provenance: Vec<FetchLogEntry>,
    #[serde(default)]
    pub review: BTreeMap<String, ReviewDecision>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReviewError {
    #[error("{0} is not a selected or expanded patch of this report")]
    UnknownPatch(String),
}

impl TraceReport {
    /// Selected node ids plus expanded commit URLs.
    pub fn predicted_commits(&self) -> BTreeSet<String> {
        self.selected
            .iter()
            .map(|s| s.node_id.clone())
            .chain(self.expanded.iter().map(|e| e.commit.url.clone()))
            .collect()
    }

    pub fn has_source_failure(&self) -> bool {
        self.network.sources.values().any(|s| matches!(s, SourceStatus::Unavailable(_)))
    }

    /// 0 patches found, 2 none found, 3 some source unavailable.
    pub fn exit_code(&self) -> i32 {
        if self.has_source_failure() {
            3
        } else if self.status == TraceStatus::Found {
            0
        } else {
            2
        }
    }

    pub fn reviewable(&self, patch_id: &str) -> bool {
        self.predicted_commits().contains(patch_id)
    }

    /// Last writer wins by timestamp; an equal timestamp replaces. Returns
    /// whether the decision became current.
    pub fn apply_review(&mut self, decision: ReviewDecision) -> Result<bool, ReviewError> {
        if !self.reviewable(&decision.patch_id) {
            return Err(ReviewError::UnknownPatch(decision.patch_id));
        }
        match self.review.get(&decision.patch_id) {
            Some(current) if current.timestamp > decision.timestamp => Ok(false),
            _ => {
                self.review.insert(decision.patch_id.clone(), decision);
                Ok(true)
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema != REPORT_SCHEMA {
            return Err(format!("unexpected schema {}", self.schema));
        }
        self.network.validate()?;
        for s in &self.selected {
            if !self.network.contains(&s.node_id) {
                return Err(format!("selected {} missing from network", s.node_id));
            }
        }
        for e in &self.expanded {
            if !self.network.contains(&e.commit.url) {
                return Err(format!("expanded {} missing from network", e.commit.url));
            }
        }
        for id in self.review.keys() {
            if !self.reviewable(id) {
                return Err(format!("review for unknown patch {id}"));
            }
        }
        if (self.status == TraceStatus::Found) == self.predicted_commits().is_empty() {
            return Err("status disagrees with predictions".into());
        }
        Ok(())
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Canonical form with every timestamp cleared, for reproducibility checks.
    pub fn canonical_without_timestamps(&self) -> String {
        let mut copy = self.clone();
        copy.generated_at = DateTime::<Utc>::UNIX_EPOCH;
        for d in copy.review.values_mut() {
            d.timestamp = DateTime::<Utc>::UNIX_EPOCH;
        }
        copy.to_canonical_json()
    }
}

/// Builds the network, selects, expands and assembles the report using an
/// existing source client. The client's fetch log becomes provenance.
pub fn run_trace(cve: &CveId, config: &RunConfig, sources: &Sources) -> Result<TraceReport, TraceError> {
    config.selection.validate()?;
    let mut notes = Vec::new();
    let mut network = match build_network(cve, sources, &config.build_config()) {
        Ok(n) => n,
        Err(BuildError::EmptyNetwork(n)) => {
            notes.push("no advisory source yielded any reference".to_string());
            *n
        }
        Err(e) => return Err(e.into()),
    };
    let selection = select_patches(&network, &config.selection)?;
    let mut selected = Vec::new();
    for c in selection.selected() {
        selected.push(SelectedPatch {
            node_id: c.node_id.clone(),
            connectivity: c.connectivity.clone(),
            confidence: c.confidence,
            paths: enumerate_paths(&network, &c.node_id)?,
        });
    }

    let mut identifiers = vec![TrackingIdentifier::cve(cve)];
    identifiers.extend(network.identifiers.iter().cloned());
    let expansion = config.expansion_config();
    let mut expanded = Vec::new();
    for s in &selected {
        let outcome = expand_patch(&mut network, &s.node_id, &expansion, &identifiers, sources);
        expanded.extend(outcome.patches);
        notes.extend(outcome.notes);
    }
    expanded.sort_by(|a, b| {
        (&a.parent_patch, &a.branches, &a.commit.commit_id).cmp(&(&b.parent_patch, &b.branches, &b.commit.commit_id))
    });
    network.recompute_source_flags();
    notes.sort();
    notes.dedup();

    let mut report = TraceReport {
        schema: REPORT_SCHEMA.to_string(),
        cve_id: cve.clone(),
        generated_at: Utc::now(),
        status: TraceStatus::NotFound,
        config: config.snapshot(),
        network,
        candidates: selection.candidates,
        selected,
        expanded,
        notes,
        provenance: sources.http().fetch_log(),
        review: BTreeMap::new(),
    };
    if !report.predicted_commits().is_empty() {
        report.status = TraceStatus::Found;
    }
    Ok(report)
}

/// Runs a trace with a client built from `config.transport`.
pub fn trace(cve: &CveId, config: &RunConfig) -> Result<TraceReport, TraceError> {
    let http = HttpClient::from_policy(&config.transport)?;
    run_trace(cve, config, &Sources::new(http))
}
