use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static CVE_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^CVE-(\d{4})-(\d{4,})$").unwrap());

/// A syntactically valid CVE identifier such as `CVE-2017-11428`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CveId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid CVE identifier {0:?}: expected CVE-YYYY-NNNN")]
pub struct InvalidCveId(pub String);

impl CveId {
    pub fn parse(s: &str) -> Result<Self, InvalidCveId> {
        let trimmed = s.trim();
        let upper = trimmed.to_ascii_uppercase();
        if CVE_PATTERN.is_match(&upper) {
            Ok(CveId(upper))
        } else {
            Err(InvalidCveId(s.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Publication-year component, which selects the yearly NVD feed.
    pub fn year(&self) -> u16 {
        self.0[4..8].parse().expect("validated on construction")
    }
}

impl fmt::Display for CveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for CveId {
    type Err = InvalidCveId;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CveId::parse(s)
    }
}

impl TryFrom<String> for CveId {
    type Error = InvalidCveId;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        CveId::parse(&s)
    }
}

impl From<CveId> for String {
    fn from(id: CveId) -> String {
        id.0
    }
}

impl AsRef<str> for CveId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
