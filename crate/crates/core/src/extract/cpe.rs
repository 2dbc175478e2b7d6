//! Owner/repository versus CPE vendor/product matching: two names match when
//! the number of matched words is not less than the number of unmatched
//! words on both sides.

use std::collections::HashMap;

use crate::sources::CpeEntry;

pub fn tokenize_name(name: &str) -> Vec<String> {
    name.split(|c: char| c == '-' || c == '_' || c == '.' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Word-count criterion over tokenized names. Matching pairs tokens one to
/// one, so repeated words count once per occurrence on each side.
pub fn name_match(a: &str, b: &str) -> bool {
    let ta = tokenize_name(a);
    let tb = tokenize_name(b);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &tb {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut matched = 0;
    for t in &ta {
        if let Some(n) = counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    let unmatched = ta.len() + tb.len() - 2 * matched;
    matched > 0 && matched >= unmatched
}

/// True when some CPE's vendor matches `owner` and its product matches `repo`.
pub fn cpe_name_match(owner: &str, repo: &str, cpes: &[CpeEntry]) -> bool {
    cpes.iter().any(|c| name_match(owner, &c.vendor) && name_match(repo, &c.product))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cpe(v: &str, p: &str) -> CpeEntry {
        CpeEntry::new(v, p).unwrap()
    }

    /// Brute force: best one-to-one pairing over all injective assignments.
    fn oracle(a: &str, b: &str) -> bool {
        let ta = tokenize_name(a);
        let tb = tokenize_name(b);
        fn best(ta: &[String], tb: &[String], used: &mut Vec<bool>) -> usize {
            let Some((first, rest)) = ta.split_first() else { return 0 };
            let mut top = best(rest, tb, used);
            for j in 0..tb.len() {
                if !used[j] && tb[j] == *first {
                    used[j] = true;
                    top = top.max(1 + best(rest, tb, used));
                    used[j] = false;
                }
            }
            top
        }
        let m = best(&ta, &tb, &mut vec![false; tb.len()]);
        let unmatched = ta.len() + tb.len() - 2 * m;
        m > 0 && m >= unmatched
    }

    #[test]
    fn complete_match() {
        assert!(cpe_name_match("onelogin", "ruby-saml", &[cpe("onelogin", "ruby-saml")]));
    }

    #[test]
    fn no_match() {
        assert!(!cpe_name_match("onelogin", "ruby-saml", &[cpe("acme", "widget")]));
        assert!(!cpe_name_match("forkuser", "ruby-saml", &[cpe("onelogin", "ruby-saml")]));
    }

    #[test]
    fn separator_variants_match() {
        assert!(oracle("commons-text", "commons_text"));
        assert!(cpe_name_match("apache", "commons-text", &[cpe("apache", "commons_text")]));
    }

    #[test]
    fn partial_overlap_threshold() {
        // 1 matched vs 1 unmatched: match
        assert!(name_match("ruby-saml", "saml"));
        // 1 matched vs 2 unmatched: no match
        assert!(!name_match("python-saml-toolkit", "saml"));
        assert!(!name_match("", ""));
    }

    fn name() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(prop_oneof![Just("saml"), Just("ruby"), Just("commons"), Just("text"), Just("x")], 1..5)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn agrees_with_brute_force(a in name(), b in name()) {
            prop_assert_eq!(name_match(&a.join("-"), &b.join("_")), oracle(&a.join("-"), &b.join("_")));
        }

        #[test]
        fn symmetric_under_token_permutation(a in name(), b in name(), seed in any::<u64>()) {
            let mut shuffled = a.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(name_match(&a.join("-"), &b.join("-")), name_match(&shuffled.join("."), &b.join("-")));
            prop_assert_eq!(name_match(&a.join("-"), &b.join("-")), name_match(&b.join("-"), &a.join("-")));
        }
    }
}
