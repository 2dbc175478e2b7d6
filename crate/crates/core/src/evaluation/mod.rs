//! Equivalence-aware precision, recall and F1, and per-cardinality tables.

pub mod experiment;
mod truth;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use truth::{parse_truth, parse_truth_item, read_truth_file, TruthError, TRUTH_SCHEMA};

use crate::cve::CveId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    /// One patch.
    SP,
    /// Alternative, equivalent patch sets; any one suffices.
    MEP,
    /// Several commits on one branch.
    MP,
    /// Several branches.
    MB,
    /// Several repositories.
    MR,
}

impl Cardinality {
    pub const ALL: [Cardinality; 5] = [Cardinality::SP, Cardinality::MEP, Cardinality::MP, Cardinality::MB, Cardinality::MR];
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Cardinality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cardinality::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown cardinality tag {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub cve_id: CveId,
    pub cardinality: Cardinality,
    /// For MEP these are alternatives; otherwise each class is required and
    /// any member of a class stands for it.
    pub equivalence_classes: Vec<BTreeSet<String>>,
}

impl GroundTruthEntry {
    pub fn members(&self) -> BTreeSet<&str> {
        self.equivalence_classes.iter().flatten().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub cve_id: CveId,
    pub cardinality: Cardinality,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub not_found: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("ground truth for {0} has no equivalence class")]
    EmptyTruth(CveId),
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn score_cve(predicted: &BTreeSet<String>, truth: &GroundTruthEntry) -> Result<ScoreRow, EvalError> {
    let classes: Vec<&BTreeSet<String>> = truth.equivalence_classes.iter().filter(|c| !c.is_empty()).collect();
    if classes.is_empty() {
        return Err(EvalError::EmptyTruth(truth.cve_id.clone()));
    }
    let members = truth.members();
    let tp = predicted.iter().filter(|p| members.contains(p.as_str())).count();
    let fp = predicted.len() - tp;

    let (recall, fn_count) = if truth.cardinality == Cardinality::MEP {
        classes
            .iter()
            .map(|c| {
                let hit = c.iter().filter(|m| predicted.contains(*m)).count();
                (hit as f64 / c.len() as f64, c.len() - hit)
            })
            .fold((0.0, usize::MAX), |best, cur| {
                if cur.0 > best.0 || (cur.0 == best.0 && cur.1 < best.1) {
                    cur
                } else {
                    best
                }
            })
    } else {
        let covered = classes.iter().filter(|c| c.iter().any(|m| predicted.contains(m))).count();
        (covered as f64 / classes.len() as f64, classes.len() - covered)
    };
    let not_found = predicted.is_empty();
    let precision = if not_found { 0.0 } else { tp as f64 / predicted.len() as f64 };
    Ok(ScoreRow {
        cve_id: truth.cve_id.clone(),
        cardinality: truth.cardinality,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        precision,
        recall,
        f1: f1(precision, recall),
        not_found,
        note: None,
    })
}

/// A failed run counts as not found.
pub fn failed_row(truth: &GroundTruthEntry, note: impl Into<String>) -> ScoreRow {
    let mut row = score_cve(&BTreeSet::new(), truth).unwrap_or(ScoreRow {
        cve_id: truth.cve_id.clone(),
        cardinality: truth.cardinality,
        true_positives: 0,
        false_positives: 0,
        false_negatives: 0,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        not_found: true,
        note: None,
    });
    row.note = Some(note.into());
    row
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    /// Cardinality tag or `Total`.
    pub label: String,
    pub count: usize,
    pub not_found: usize,
    pub not_found_pct: Option<f64>,
    /// Macro averages over rows with a non-empty prediction.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

fn aggregate_rows(label: &str, rows: &[&ScoreRow]) -> AggregateRow {
    let found: Vec<&&ScoreRow> = rows.iter().filter(|r| !r.not_found).collect();
    let mean = |f: fn(&ScoreRow) -> f64| {
        (!found.is_empty()).then(|| found.iter().map(|r| f(r)).sum::<f64>() / found.len() as f64)
    };
    let not_found = rows.len() - found.len();
    AggregateRow {
        label: label.to_string(),
        count: rows.len(),
        not_found,
        not_found_pct: (!rows.is_empty()).then(|| 100.0 * not_found as f64 / rows.len() as f64),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
    }
}

/// One row per cardinality present in `rows`, then `Total`.
pub fn aggregate(rows: &[ScoreRow]) -> AggregateTable {
    let mut out = Vec::new();
    for c in Cardinality::ALL {
        let subset: Vec<&ScoreRow> = rows.iter().filter(|r| r.cardinality == c).collect();
        if !subset.is_empty() {
            out.push(aggregate_rows(&c.to_string(), &subset));
        }
    }
    out.push(aggregate_rows("Total", &rows.iter().collect::<Vec<_>>()));
    AggregateTable { rows: out }
}

impl AggregateTable {
    pub fn total(&self) -> &AggregateRow {
        self.rows.last().expect("total row")
    }

    pub fn row(&self, label: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

impl fmt::Display for AggregateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        writeln!(f, "{:<6} {:>5} {:>10} {:>7} {:>7} {:>7}", "Class", "CVEs", "Not Found", "Pre.", "Rec.", "F1")?;
        for r in &self.rows {
            let nf = r.not_found_pct.map(|p| format!("{p:.1}%")).unwrap_or_default();
            writeln!(
                f,
                "{:<6} {:>5} {:>10} {:>7} {:>7} {:>7}",
                r.label,
                r.count,
                nf,
                cell(r.precision),
                cell(r.recall),
                cell(r.f1)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(card: Cardinality, classes: &[&[&str]]) -> GroundTruthEntry {
        GroundTruthEntry {
            cve_id: CveId::parse("CVE-2020-0001").unwrap(),
            cardinality: card,
            equivalence_classes: classes.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect(),
        }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn three_branch_partial() {
        let row = score_cve(&set(&["a"]), &entry(Cardinality::MB, &[&["a"], &["b"], &["c"]])).unwrap();
        assert_eq!(row.precision, 1.0);
        assert_eq!(row.recall, 1.0 / 3.0);
        assert_eq!(row.false_negatives, 2);
    }

    #[test]
    fn empty_truth_is_an_error() {
        assert!(score_cve(&set(&["a"]), &entry(Cardinality::SP, &[])).is_err());
    }

    #[test]
    fn aggregate_layout() {
        let rows = vec![
            score_cve(&set(&["a"]), &entry(Cardinality::SP, &[&["a"]])).unwrap(),
            score_cve(&set(&[]), &entry(Cardinality::MB, &[&["a"], &["b"]])).unwrap(),
        ];
        let t = aggregate(&rows);
        assert_eq!(t.row("SP").unwrap().f1, Some(1.0));
        assert_eq!(t.row("MB").unwrap().not_found_pct, Some(100.0));
        assert_eq!(t.row("MB").unwrap().precision, None);
        assert_eq!(t.total().count, 2);
        assert!(t.to_string().contains("Total"));
    }

    #[test]
    fn all_empty_predictions() {
        let rows = vec![score_cve(&set(&[]), &entry(Cardinality::SP, &[&["a"]])).unwrap()];
        let t = aggregate(&rows);
        assert_eq!(t.total().not_found_pct, Some(100.0));
        assert_eq!(t.total().f1, None);
    }
}
