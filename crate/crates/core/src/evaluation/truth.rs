//! Line-oriented ground-truth files:
//!
//! ```text
//! # schema: patchnet.truth/1
//! CVE-2017-11428 MB {onelogin/ruby-saml@048a54...} | {https://github.com/onelogin/ruby-saml/commit/d7ce60...}
//! ```
//!
//! Items are commit URLs or `owner/repo@sha` shorthand. Classes must be
//! pairwise disjoint after normalization.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use super::{Cardinality, GroundTruthEntry};
use crate::cve::CveId;
use crate::sources::CommitRef;
use crate::urlnorm;

pub const TRUTH_SCHEMA: &str = "patchnet.truth/1";

#[derive(Debug, thiserror::Error)]
pub enum TruthError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported truth schema {0:?}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Normalizes one item to a canonical commit URL.
pub fn parse_truth_item(item: &str) -> Result<String, String> {
    let item = item.trim();
    if item.contains("://") {
        return urlnorm::normalize(item).map_err(|e| e.to_string());
    }
    let (repo_path, sha) = item.split_once('@').ok_or_else(|| format!("bad item {item:?}"))?;
    let (owner, repo) = repo_path.split_once('/').ok_or_else(|| format!("bad item {item:?}"))?;
    if owner.is_empty() || repo.is_empty() || sha.len() < 7 || !sha.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(format!("bad item {item:?}"));
    }
    Ok(CommitRef::github(owner, repo, sha).url)
}

pub fn parse_truth(text: &str) -> Result<Vec<GroundTruthEntry>, TruthError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| TruthError::Syntax { line: line_no, message };
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(schema) = comment.trim().strip_prefix("schema:") {
                let schema = schema.trim();
                if schema != TRUTH_SCHEMA {
                    return Err(TruthError::Schema(schema.to_string()));
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, char::is_whitespace);
        let cve = CveId::parse(parts.next().unwrap_or_default()).map_err(|e| err(e.to_string()))?;
        let cardinality: Cardinality = parts.next().unwrap_or_default().parse().map_err(err)?;
        let rest = parts.next().unwrap_or_default();
        let mut classes = Vec::new();
        let mut all = BTreeSet::new();
        for group in rest.split('|') {
            let group = group.trim();
            let inner = group
                .strip_prefix('{')
                .and_then(|g| g.strip_suffix('}'))
                .ok_or_else(|| err(format!("expected {{...}} group, found {group:?}")))?;
            let mut class = BTreeSet::new();
            for item in inner.split(',').filter(|s| !s.trim().is_empty()) {
                let url = parse_truth_item(item).map_err(err)?;
                if !all.insert(url.clone()) {
                    return Err(err(format!("{url} appears in more than one class")));
                }
                class.insert(url);
            }
            if class.is_empty() {
                return Err(err("empty class".into()));
            }
            classes.push(class);
        }
        if cardinality == Cardinality::MEP && classes.len() < 2 {
            return Err(err("MEP needs at least two alternative classes".into()));
        }
        if !seen.insert(cve.clone()) {
            return Err(err(format!("duplicate entry for {cve}")));
        }
        out.push(GroundTruthEntry { cve_id: cve, cardinality, equivalence_classes: classes });
    }
    Ok(out)
}

pub fn read_truth_file(path: &Path) -> Result<Vec<GroundTruthEntry>, TruthError> {
    parse_truth(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHA: &str = "048a544730930f86e46804387a6b6fad50d8176f";

    #[test]
    fn parses_shorthand_and_urls() {
        let text = format!(
            "# schema: patchnet.truth/1\nCVE-2017-11428 MB {{onelogin/ruby-saml@{SHA}}} | {{https://github.com/OneLogin/ruby-saml/commit/{}}}\n",
            "d".repeat(40)
        );
        let entries = parse_truth(&text).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].cardinality, Cardinality::MB);
        assert!(entries[0].equivalence_classes[0].contains(&format!("https://github.com/onelogin/ruby-saml/commit/{SHA}")));
        assert!(entries[0].equivalence_classes[1].iter().next().unwrap().contains("/onelogin/ruby-saml/commit/dddd"));
    }

    #[test]
    fn rejects_overlapping_classes() {
        let text = format!("CVE-2017-11428 MEP {{o/r@{SHA}}} | {{o/r@{SHA}}}");
        assert!(matches!(parse_truth(&text), Err(TruthError::Syntax { line: 1, .. })));
    }

    #[test]
    fn rejects_single_alternative_mep_and_bad_schema() {
        assert!(parse_truth(&format!("CVE-2017-11428 MEP {{o/r@{SHA}}}")).is_err());
        assert!(matches!(parse_truth("# schema: other/9"), Err(TruthError::Schema(_))));
    }
}
