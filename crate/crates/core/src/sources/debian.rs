//! Debian security tracker `data/CVE/list`.
//!
//! Continuation lines start with a tab:
//!
//! ```text
//! CVE-2017-11428 (OneLogin Ruby-SAML 1.6.0 and earlier may incorrectly ...)
//!     - ruby-saml 1.7.2-1 (bug #877009)
//!     NOTE: https://github.com/onelogin/ruby-saml/commit/048a5447...
//! ```

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};

use super::{expect_success, AdvisoryDocument, SourceError, SourceId, Sources};
use crate::cve::CveId;

pub(super) struct DebianList {
    notes: HashMap<String, Vec<String>>,
    fetched_at: DateTime<Utc>,
}

impl DebianList {
    pub(super) fn parse(text: &str, fetched_at: DateTime<Utc>) -> Self {
        let mut notes: HashMap<String, Vec<String>> = HashMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            if line.starts_with(char::is_whitespace) {
                let Some(cve) = &current else { continue };
                if let Some(note) = line.trim_start().strip_prefix("NOTE:") {
                    notes.entry(cve.clone()).or_default().push(note.trim().to_string());
                }
            } else if line.starts_with("CVE-") {
                let id = line.split_whitespace().next().unwrap_or_default().to_ascii_uppercase();
                notes.entry(id.clone()).or_default();
                current = Some(id);
            } else {
                current = None;
            }
        }
        DebianList { notes, fetched_at }
    }

    pub(super) fn advisory(&self, cve: &CveId) -> Option<AdvisoryDocument> {
        let notes = self.notes.get(cve.as_str())?;
        let mut raw_fields = BTreeMap::new();
        raw_fields.insert("Notes".to_string(), notes.join("\n"));
        Some(AdvisoryDocument { source: SourceId::Debian, cve_id: cve.clone(), raw_fields, fetched_at: self.fetched_at })
    }
}

pub(super) fn load_list(sources: &Sources) -> Result<DebianList, SourceError> {
    let url = sources.endpoints.debian_list.clone();
    let resp = sources.get(&url)?;
    expect_success(&resp, &url)?;
    let text = String::from_utf8(resp.body.clone()).map_err(|e| SourceError::parse(&url, e))?;
    Ok(DebianList::parse(&text, resp.recorded_at))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIST: &str = "CVE-2017-11430 (desc)\n\t- golang-saml <itp>\n\tNOTE: https://a.org/x\n\
CVE-2017-11428 (OneLogin Ruby-SAML 1.6.0 ...)\n\t- ruby-saml 1.7.2-1 (bug #877009)\n\
\tNOTE: https://github.com/onelogin/ruby-saml/commit/048a544730930f86e46804387a6b6fad50d8176f\n\
\tNOTE: https://duo.com/blog/x\n\
CVE-2017-11427\n\tNOT-FOR-US: Foo\n";

    fn ts() -> DateTime<Utc> {
        DateTime::from_timestamp(0, 0).unwrap()
    }

    #[test]
    fn extracts_notes_per_cve() {
        let list = DebianList::parse(LIST, ts());
        let doc = list.advisory(&CveId::parse("CVE-2017-11428").unwrap()).unwrap();
        let notes = doc.field("Notes").unwrap();
        assert!(notes.contains("ruby-saml/commit/048a54"));
        assert!(notes.contains("duo.com"));
        assert!(!notes.contains("a.org/x"));
    }

    #[test]
    fn tracked_without_notes_is_present_but_empty() {
        let list = DebianList::parse(LIST, ts());
        let doc = list.advisory(&CveId::parse("CVE-2017-11427").unwrap()).unwrap();
        assert_eq!(doc.field("Notes"), Some(""));
    }

    #[test]
    fn untracked_is_absent() {
        let list = DebianList::parse(LIST, ts());
        assert!(list.advisory(&CveId::parse("CVE-2099-0001").unwrap()).is_none());
    }
}
