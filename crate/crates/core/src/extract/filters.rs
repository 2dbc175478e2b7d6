use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::sources::CommitDetail;

const DEFAULT_EXTENSIONS: &[&str] = &[
    "java", "c", "h", "cc", "cpp", "cxx", "hpp", "hh", "hxx", "inl", "py", "js", "jsx", "mjs", "cjs", "ts", "tsx",
    "php", "rb", "go",
];

const TEST_WORDS: &[&str] = &["test", "tests", "testing", "testdata", "testcase", "testcases", "testsuite"];

/// File extensions counted as source code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceExtensions(BTreeSet<String>);

impl Default for SourceExtensions {
    fn default() -> Self {
        SourceExtensions(DEFAULT_EXTENSIONS.iter().map(|s| s.to_string()).collect())
    }
}

impl SourceExtensions {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(exts: I) -> Self {
        SourceExtensions(
            exts.into_iter()
                .map(|e| e.as_ref().trim_start_matches('.').to_ascii_lowercase())
                .collect(),
        )
    }

    pub fn contains(&self, ext: &str) -> bool {
        self.0.contains(&ext.to_ascii_lowercase())
    }
}

/// Splits a path segment into words at `_ - .` and spaces, camelCase humps
/// and letter/digit boundaries.
fn words(segment: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in segment.split(|c: char| c == '_' || c == '-' || c == '.' || c.is_whitespace()) {
        let chars: Vec<char> = chunk.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if !cur.is_empty() {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                let boundary = (prev.is_lowercase() && c.is_uppercase())
                    || (prev.is_uppercase() && c.is_uppercase() && next_lower)
                    || (prev.is_alphabetic() != c.is_alphabetic());
                if boundary {
                    out.push(std::mem::take(&mut cur).to_lowercase());
                }
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            out.push(cur.to_lowercase());
        }
    }
    out
}

/// A path is test code when some segment contains the word "test" (or a
/// close variant). `latest/` or `attest.c` are not test code.
pub fn is_test_path(path: &str) -> bool {
    path.split('/')
        .flat_map(words)
        .any(|w| TEST_WORDS.contains(&w.as_str()))
}

pub fn is_source_path(path: &str, exts: &SourceExtensions) -> bool {
    let file = path.rsplit('/').next().unwrap_or(path);
    match file.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() => exts.contains(ext),
        _ => false,
    }
}

/// True when no changed path is non-test source code. An empty change list
/// counts as true.
pub fn is_test_or_nonsource_only(detail: &CommitDetail, exts: &SourceExtensions) -> bool {
    detail
        .changed_paths
        .iter()
        .all(|p| is_test_path(p) || !is_source_path(p, exts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::CommitRef;
    use proptest::prelude::*;

    fn detail(paths: &[&str]) -> CommitDetail {
        CommitDetail {
            commit: CommitRef::github("o", "r", "0123456789abcdef0123456789abcdef01234567"),
            message: String::new(),
            changed_paths: paths.iter().map(|p| p.to_string()).collect(),
            committed_at: None,
            authored_at: None,
            branch_hint: None,
            is_merge: false,
        }
    }

    #[test]
    fn word_splitting() {
        assert_eq!(words("FooTest"), vec!["foo", "test"]);
        assert_eq!(words("XMLTestCase"), vec!["xml", "test", "case"]);
        assert_eq!(words("schema_test.go"), vec!["schema", "test", "go"]);
        assert_eq!(words("test2"), vec!["test", "2"]);
    }

    #[test]
    fn test_paths() {
        for p in ["schema_test.go", "spec/test/foo.rb", "src/test/java/FooTest.java", "__tests__/a.js", "tests/x.py", "TestUtils.java"] {
            assert!(is_test_path(p), "{p}");
        }
        for p in ["lib/onelogin/ruby-saml/response.rb", "latest/x.c", "attest.c", "contest/main.go"] {
            assert!(!is_test_path(p), "{p}");
        }
    }

    #[test]
    fn go_test_only_commit_is_filtered() {
        assert!(is_test_or_nonsource_only(&detail(&["schema_test.go", "xmlenc/decrypt_test.go"]), &SourceExtensions::default()));
    }

    #[test]
    fn library_change_is_kept() {
        assert!(!is_test_or_nonsource_only(
            &detail(&["lib/onelogin/ruby-saml/utils.rb", "test/utils_test.rb"]),
            &SourceExtensions::default()
        ));
    }

    #[test]
    fn docs_only_commit_is_filtered() {
        assert!(is_test_or_nonsource_only(&detail(&["README.md", "docs/changelog.txt"]), &SourceExtensions::default()));
        assert!(is_test_or_nonsource_only(&detail(&[]), &SourceExtensions::default()));
    }

    #[test]
    fn extension_list_is_configurable() {
        let exts = SourceExtensions::new([".rs"]);
        assert!(!is_test_or_nonsource_only(&detail(&["src/lib.rs"]), &exts));
        assert!(is_test_or_nonsource_only(&detail(&["src/lib.c"]), &exts));
    }

    fn path() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof!["[a-z]{1,8}", Just("test".to_string()), Just("FooTest".to_string()), Just("latest".to_string())],
            1..4,
        )
        .prop_flat_map(|segs| {
            prop_oneof![Just("c"), Just("md"), Just("go"), Just("txt"), Just("rb"), Just("json")]
                .prop_map(move |ext| format!("{}.{ext}", segs.join("/")))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn adding_a_path_never_flips_false_to_true(paths in proptest::collection::vec(path(), 0..6), extra in path()) {
            let exts = SourceExtensions::default();
            let before: Vec<&str> = paths.iter().map(String::as_str).collect();
            let mut after = before.clone();
            after.push(&extra);
            let b = is_test_or_nonsource_only(&detail(&before), &exts);
            let a = is_test_or_nonsource_only(&detail(&after), &exts);
            prop_assert!(!( !b && a ));
            if is_source_path(&extra, &exts) && !is_test_path(&extra) {
                prop_assert!(!a);
            }
        }
    }
}
