use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};

use super::NodeKind;
use crate::urlnorm;

static URL_IN_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"https?://[^\s<>"'`{}|\\^\[\]]+"#).unwrap());
static ANCHOR: LazyLock<Selector> = LazyLock::new(|| Selector::parse("a[href]").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    PlainText,
    Hyperlink,
    AdvisoryField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedReference {
    pub url: String,
    pub kind: Option<NodeKind>,
    pub via: Via,
}

/// Harvests URLs from plain text and from `<a href>` targets.
///
/// Plain-text matches come first, in text order, followed by anchors in
/// document order; duplicates after normalization keep their first position.
/// Relative hrefs are resolved against `base_url` and dropped when it is not
/// a valid absolute URL.
pub fn extract_urls(document_text: &str, base_url: &str) -> Vec<ExtractedReference> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |url: String, via: Via| {
        if seen.insert(url.clone()) {
            out.push(ExtractedReference { url, kind: None, via });
        }
    };

    for m in URL_IN_TEXT.find_iter(document_text) {
        let cleaned = trim_trailing(&m.as_str().replace("&amp;", "&"));
        if let Ok(url) = urlnorm::normalize(&cleaned) {
            push(url, Via::PlainText);
        }
    }

    if document_text.contains('<') {
        let doc = Html::parse_document(document_text);
        for a in doc.select(&ANCHOR) {
            let Some(href) = a.value().attr("href") else { continue };
            let href = href.trim();
            if href.is_empty() || href.starts_with('#') || href.starts_with("javascript:") {
                continue;
            }
            if let Ok(url) = urlnorm::resolve(base_url, href) {
                if url.starts_with("http://") || url.starts_with("https://") {
                    push(url, Via::Hyperlink);
                }
            }
        }
    }
    out
}

/// Drops sentence punctuation glued to a URL, and a closing parenthesis
/// without an opening partner.
fn trim_trailing(s: &str) -> String {
    let mut s = s.to_string();
    while let Some(last) = s.chars().last() {
        let strip = match last {
            '.' | ',' | ';' | ':' | '!' | '?' | '\'' | '"' => true,
            ')' => s.matches('(').count() < s.matches(')').count(),
            _ => false,
        };
        if !strip {
            break;
        }
        s.pop();
    }
    s
}
