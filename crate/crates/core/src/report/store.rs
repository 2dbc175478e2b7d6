//! Directory-backed report store:
//!
//! ```text
//! <store>/config.json          run configuration used by queued traces
//! <store>/reports/<CVE>.json   one report per CVE
//! <store>/audit.log            append-only JSON lines
//! ```

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ReviewDecision, ReviewError, RunConfig, TraceReport, TraceStatus};
use crate::cve::CveId;

pub const STORE_CONFIG: &str = "config.json";
const REPORTS: &str = "reports";
const AUDIT_LOG: &str = "audit.log";

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no report for {0}")]
    UnknownReport(CveId),
    #[error("report for {cve} is invalid: {message}")]
    Invalid { cve: CveId, message: String },
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    Review,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub cve_id: CveId,
    pub action: AuditAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<ReviewDecision>,
    /// Whether a review became the current decision.
    #[serde(default)]
    pub applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub cve_id: CveId,
    pub status: TraceStatus,
    pub generated_at: DateTime<Utc>,
    pub selected: usize,
    pub expanded: usize,
}

/// Writes are serialized through one lock; reads see whole files because
/// every write goes through a rename.
#[derive(Debug)]
pub struct ReportStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl ReportStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let reports = root.join(REPORTS);
        fs::create_dir_all(&reports).map_err(io_err(&reports))?;
        Ok(ReportStore { root, write_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn report_path(&self, cve: &CveId) -> PathBuf {
        self.root.join(REPORTS).join(format!("{cve}.json"))
    }

    pub fn config(&self) -> Result<RunConfig, StoreError> {
        let path = self.root.join(STORE_CONFIG);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| StoreError::Json { path, source }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RunConfig::default()),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    pub fn save_config(&self, config: &RunConfig) -> Result<(), StoreError> {
        let path = self.root.join(STORE_CONFIG);
        let json = serde_json::to_vec_pretty(config).map_err(|source| StoreError::Json { path: path.clone(), source })?;
        write_atomic(&path, &json)
    }

    pub fn contains(&self, cve: &CveId) -> bool {
        self.report_path(cve).exists()
    }

    pub fn save(&self, report: &TraceReport) -> Result<PathBuf, StoreError> {
        report
            .validate()
            .map_err(|message| StoreError::Invalid { cve: report.cve_id.clone(), message })?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.save_unlocked(report)
    }

    fn save_unlocked(&self, report: &TraceReport) -> Result<PathBuf, StoreError> {
        let path = self.report_path(&report.cve_id);
        write_atomic(&path, report.to_canonical_json().as_bytes())?;
        Ok(path)
    }

    /// Loads and re-validates a report.
    pub fn load(&self, cve: &CveId) -> Result<TraceReport, StoreError> {
        let path = self.report_path(cve);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::UnknownReport(cve.clone())),
            Err(e) => return Err(StoreError::Io { path, source: e }),
        };
        let report: TraceReport =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Json { path: path.clone(), source })?;
        report.validate().map_err(|message| StoreError::Invalid { cve: cve.clone(), message })?;
        Ok(report)
    }

    pub fn list(&self) -> Result<Vec<ReportSummary>, StoreError> {
        let dir = self.root.join(REPORTS);
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            let Some(stem) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            let Ok(cve) = CveId::parse(stem) else { continue };
            let r = self.load(&cve)?;
            out.push(ReportSummary {
                cve_id: r.cve_id,
                status: r.status,
                generated_at: r.generated_at,
                selected: r.selected.len(),
                expanded: r.expanded.len(),
            });
        }
        out.sort_by(|a, b| a.cve_id.as_str().cmp(b.cve_id.as_str()));
        Ok(out)
    }

    fn append_unlocked(&self, entry: &AuditEntry) -> Result<(), StoreError> {
        let path = self.root.join(AUDIT_LOG);
        let mut line = serde_json::to_string(entry).map_err(|source| StoreError::Json { path: path.clone(), source })?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(line.as_bytes()).map_err(io_err(&path))
    }

    pub fn append_audit(&self, entry: &AuditEntry) -> Result<(), StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.append_unlocked(entry)
    }

    /// All audit entries, optionally for one CVE, in append order.
    pub fn audit(&self, cve: Option<&CveId>) -> Result<Vec<AuditEntry>, StoreError> {
        let path = self.root.join(AUDIT_LOG);
        let f = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(StoreError::Io { path, source: e }),
        };
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: AuditEntry =
                serde_json::from_str(&line).map_err(|source| StoreError::Json { path: path.clone(), source })?;
            if cve.is_none_or(|c| *c == entry.cve_id) {
                out.push(entry);
            }
        }
        Ok(out)
    }

    /// Applies a review decision under the write lock and records it in the
    /// audit log whether or not it became current.
    pub fn apply_review(&self, cve: &CveId, decision: ReviewDecision) -> Result<(TraceReport, bool), StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut report = self.load(cve)?;
        let applied = report.apply_review(decision.clone())?;
        if applied {
            self.save_unlocked(&report)?;
        }
        self.append_unlocked(&AuditEntry {
            at: Utc::now(),
            cve_id: cve.clone(),
            action: AuditAction::Review,
            decision: Some(decision),
            applied,
            detail: None,
        })?;
        Ok((report, applied))
    }

    /// Saves a fresh trace, carrying over existing review decisions that
    /// still refer to predicted patches.
    pub fn save_trace(&self, mut report: TraceReport) -> Result<TraceReport, StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Ok(old) = self.load(&report.cve_id) {
            for (id, d) in old.review {
                if report.reviewable(&id) {
                    report.review.insert(id, d);
                }
            }
        }
        report
            .validate()
            .map_err(|message| StoreError::Invalid { cve: report.cve_id.clone(), message })?;
        self.save_unlocked(&report)?;
        self.append_unlocked(&AuditEntry {
            at: Utc::now(),
            cve_id: report.cve_id.clone(),
            action: AuditAction::Trace,
            decision: None,
            applied: true,
            detail: Some(format!("{:?}", report.status).to_lowercase()),
        })?;
        Ok(report)
    }
}
