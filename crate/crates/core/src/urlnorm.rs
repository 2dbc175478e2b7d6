//! URL normalization shared by reference deduplication and cache keys.
//!
//! Rules, applied in order:
//!
//! 1. parse as an absolute URL (scheme and host are lowercased by the parser)
//! 2. drop the fragment
//! 3. drop tracking query parameters (`utm_*`, `fbclid`, `gclid`, ...)
//! 4. collapse runs of `/` in the path and drop a trailing `/`
//! 5. rewrite GitHub commit URLs to `https://github.com/<owner>/<repo>/commit/<id>`
//!
//! `normalize` is idempotent.

use std::sync::LazyLock;

use regex::Regex;
use url::Url;

const TRACKING_PARAMS: &[&str] = &["fbclid", "gclid", "yclid", "mc_cid", "mc_eid", "_ga", "_hsenc", "_hsmi"];

static GITHUB_COMMIT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^/([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+)/(?:commit|commits|pull/\d+/commits?)/([0-9a-fA-F]{7,40})(?:\.patch|\.diff)?$",
    )
    .unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("not an absolute URL: {0}")]
    NotAbsolute(String),
    #[error("URL has no host: {0}")]
    NoHost(String),
}

/// Normalizes an absolute URL. See the module docs for the rule list.
pub fn normalize(raw: &str) -> Result<String, NormalizeError> {
    let url = Url::parse(raw.trim()).map_err(|_| NormalizeError::NotAbsolute(raw.to_string()))?;
    normalize_parsed(url, raw)
}

/// Resolves `href` against `base` and normalizes the result.
pub fn resolve(base: &str, href: &str) -> Result<String, NormalizeError> {
    let href = href.trim();
    if let Ok(abs) = Url::parse(href) {
        return normalize_parsed(abs, href);
    }
    let base = Url::parse(base).map_err(|_| NormalizeError::NotAbsolute(base.to_string()))?;
    let joined = base
        .join(href)
        .map_err(|_| NormalizeError::NotAbsolute(href.to_string()))?;
    normalize_parsed(joined, href)
}

fn normalize_parsed(mut url: Url, raw: &str) -> Result<String, NormalizeError> {
    if url.cannot_be_a_base() || url.host_str().is_none() {
        return Err(NormalizeError::NoHost(raw.to_string()));
    }
    url.set_fragment(None);

    if url.query().is_some() {
        let kept: Vec<(String, String)> = url
            .query_pairs()
            .filter(|(k, _)| !is_tracking_param(k))
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        if kept.is_empty() {
            url.set_query(None);
        } else {
            url.query_pairs_mut().clear().extend_pairs(kept);
        }
    }

    let path = collapse_path(url.path());
    url.set_path(&path);

    if let Some(host) = url.host_str() {
        if host == "github.com" || host == "www.github.com" {
            if let Some(caps) = GITHUB_COMMIT.captures(url.path()) {
                return Ok(format!(
                    "https://github.com/{}/{}/commit/{}",
                    caps[1].to_ascii_lowercase(),
                    caps[2].to_ascii_lowercase(),
                    caps[3].to_ascii_lowercase()
                ));
            }
        }
    }
    Ok(url.to_string())
}

fn is_tracking_param(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.starts_with("utm_") || TRACKING_PARAMS.contains(&key.as_str())
}

fn collapse_path(path: &str) -> String {
    let mut out = String::with_capacity(path.len());
    let mut prev_slash = false;
    for c in path.chars() {
        if c == '/' {
            if prev_slash {
                continue;
            }
            prev_slash = true;
        } else {
            prev_slash = false;
        }
        out.push(c);
    }
    while out.len() > 1 && out.ends_with('/') {
        out.pop();
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lowercases_host_and_strips_fragment() {
        assert_eq!(
            normalize("HTTPS://Example.COM/a/b#frag").unwrap(),
            "https://example.com/a/b"
        );
    }

    #[test]
    fn strips_tracking_params_but_keeps_others() {
        assert_eq!(
            normalize("https://x.org/p?utm_source=tw&id=5&fbclid=abc").unwrap(),
            "https://x.org/p?id=5"
        );
        assert_eq!(normalize("https://x.org/p?utm_medium=a").unwrap(), "https://x.org/p");
    }

    #[test]
    fn collapses_slashes() {
        assert_eq!(normalize("https://x.org//a///b/").unwrap(), "https://x.org/a/b");
        assert_eq!(normalize("https://x.org").unwrap(), "https://x.org/");
    }

    #[test]
    fn canonicalizes_github_commits() {
        let want = "https://github.com/onelogin/ruby-saml/commit/048a544730930f86e46804387a6b6fad50d8176f";
        for raw in [
            "https://github.com/onelogin/ruby-saml/commit/048a544730930f86e46804387a6b6fad50d8176f",
            "https://www.github.com/OneLogin/ruby-saml/commit/048A544730930F86E46804387A6B6FAD50D8176F",
            "https://github.com/onelogin/ruby-saml/commit/048a544730930f86e46804387a6b6fad50d8176f.patch",
            "https://github.com/onelogin/ruby-saml/pull/421/commits/048a544730930f86e46804387a6b6fad50d8176f",
            "https://github.com/onelogin/ruby-saml/commit/048a544730930f86e46804387a6b6fad50d8176f?diff=split#L12",
        ] {
            assert_eq!(normalize(raw).unwrap(), want, "{raw}");
        }
    }

    #[test]
    fn resolves_relative_links() {
        assert_eq!(
            resolve("https://github.com/crewjam/saml/issues/140", "/crewjam/saml/issues/163").unwrap(),
            "https://github.com/crewjam/saml/issues/163"
        );
        assert_eq!(
            resolve("https://a.org/x/y", "https://b.org/z").unwrap(),
            "https://b.org/z"
        );
    }

    #[test]
    fn rejects_non_urls() {
        assert!(normalize("not a url").is_err());
        assert!(normalize("mailto:a@b.org").is_err());
    }

    proptest! {
        #[test]
        fn idempotent(
            host in "[a-zA-Z]{1,8}\\.(com|org)",
            segs in proptest::collection::vec("[a-zA-Z0-9_.-]{0,6}", 0..5),
            query in proptest::option::of("[a-z]{1,4}=[a-z0-9]{0,4}"),
            utm in any::<bool>(),
            frag in proptest::option::of("[a-z]{1,5}"),
        ) {
            let mut raw = format!("https://{host}/{}", segs.join("/"));
            if let Some(q) = &query {
                raw.push('?');
                raw.push_str(q);
                if utm { raw.push_str("&utm_source=x"); }
            }
            if let Some(f) = &frag {
                raw.push('#');
                raw.push_str(f);
            }
            let once = normalize(&raw).unwrap();
            let twice = normalize(&once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
