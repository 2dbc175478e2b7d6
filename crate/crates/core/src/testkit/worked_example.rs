//! The ruby-saml canonicalization CVE, rebuilt as a synthetic world.

use super::{sha, SyntheticCommit, World};
use crate::cve::CveId;

pub const CVE: &str = "CVE-2017-11428";
pub const CPE: &str = "cpe:2.3:a:onelogin:ruby-saml:*:*:*:*:*:ruby:*:*";
pub const DUO_BLOG: &str = "https://duo.com/blog/duo-finds-saml-vulnerabilities-affecting-multiple-implementations";
pub const CERT_NOTE: &str = "https://www.kb.cert.org/vuls/id/475445";
pub const SAMLBASE_ISSUE: &str = "https://github.com/samlbase/samlbase/issues/3";
pub const SAML_PR: &str = "https://github.com/crewjam/saml/pull/140";
pub const SAML_ISSUE: &str = "https://github.com/crewjam/saml/issues/163";
pub const GOSAML_ISSUE: &str = "https://github.com/russellhaering/gosaml2/issues/36";

const FIX_MESSAGE: &str = "Fix CVE-2017-11428: use canonicalized NameID text\n\n\
Comments inside the NameID element truncated the value returned by the\n\
REXML text accessor. Read the full canonicalized text instead.";

/// Commit ids of the example, all full 40-hex strings.
#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub cve: CveId,
    pub fix: String,
    pub samlbase_fix: String,
    pub backport_08: String,
    pub backport_09: String,
    pub backport_16: String,
    pub fork: String,
    pub saml_tests: [String; 2],
}

impl WorkedExample {
    pub fn commit_url(owner: &str, repo: &str, sha: &str) -> String {
        format!("https://github.com/{owner}/{repo}/commit/{sha}")
    }

    pub fn fix_url(&self) -> String {
        Self::commit_url("onelogin", "ruby-saml", &self.fix)
    }

    pub fn samlbase_url(&self) -> String {
        Self::commit_url("samlbase", "samlbase", &self.samlbase_fix)
    }

    pub fn backport_urls(&self) -> Vec<String> {
        [&self.backport_08, &self.backport_09, &self.backport_16]
            .iter()
            .map(|s| Self::commit_url("onelogin", "ruby-saml", s))
            .collect()
    }

    pub fn truth_line(&self) -> String {
        format!(
            "{} MB {{onelogin/ruby-saml@{}}} | {{onelogin/ruby-saml@{}}} | {{onelogin/ruby-saml@{}}} | {{onelogin/ruby-saml@{}}}",
            self.cve, self.fix, self.backport_08, self.backport_09, self.backport_16
        )
    }
}

fn anchors(urls: &[&str]) -> String {
    let mut s = String::from("<html><body><article>\n");
    for u in urls {
        s.push_str(&format!("<p>See <a href=\"{u}\">{u}</a></p>\n"));
    }
    s.push_str("</article></body></html>\n");
    s
}

pub fn worked_example_world() -> (World, WorkedExample) {
    let ex = WorkedExample {
        cve: CVE.parse().expect("valid id"),
        fix: sha("048a54"),
        samlbase_fix: sha("482cdf"),
        backport_08: sha("d7ce60"),
        backport_09: sha("a35f72"),
        backport_16: sha("03af9e"),
        fork: sha("f0f0aa"),
        saml_tests: [sha("814d1d"), sha("55d682")],
    };
    let mut w = World::new();
    let fix_url = ex.fix_url();

    w.nvd(CVE, &[DUO_BLOG, CERT_NOTE], &[CPE]);
    w.debian(CVE, &[DUO_BLOG, CERT_NOTE, &fix_url]);
    // Also tracked in the same feed year, unrelated.
    w.nvd("CVE-2017-11427", &["https://example.com/advisory/other"], &["cpe:2.3:a:python-saml:python-saml:*:*:*:*:*:*:*:*"]);

    w.page(DUO_BLOG, &anchors(&[CERT_NOTE, "https://duo.com/blog"]));
    w.page(
        CERT_NOTE,
        &anchors(&[SAMLBASE_ISSUE, SAML_PR, &ex.samlbase_url(), DUO_BLOG, "https://www.kb.cert.org/vuls/"]),
    );
    w.page(SAMLBASE_ISSUE, &anchors(&[&ex.samlbase_url()]));
    let saml_tests: Vec<String> =
        ex.saml_tests.iter().map(|s| WorkedExample::commit_url("crewjam", "saml", s)).collect();
    w.page(SAML_PR, &anchors(&[SAML_ISSUE, GOSAML_ISSUE, &saml_tests[0], &saml_tests[1]]));
    w.page(SAML_ISSUE, &anchors(&["https://golang.org/pkg/encoding/xml/"]));

    w.repo("onelogin", "ruby-saml", "master");
    w.commit(
        SyntheticCommit::new(
            "onelogin",
            "ruby-saml",
            &ex.fix,
            FIX_MESSAGE,
            &["lib/onelogin/ruby-saml/response.rb", "lib/onelogin/ruby-saml/utils.rb", "test/response_test.rb"],
            "2017-10-24T18:09:11Z",
        ),
        &["master"],
    );
    w.commit(
        SyntheticCommit::new(
            "onelogin",
            "ruby-saml",
            &sha("9e1a77"),
            "Release 1.7.0",
            &["lib/onelogin/ruby-saml/version.rb", "changelog.md"],
            "2017-10-25T09:00:00Z",
        ),
        &["master"],
    );
    let old_branches: Vec<String> = (3..=17).map(|n| format!("0.8.{n}")).collect();
    let old_refs: Vec<&str> = old_branches.iter().map(String::as_str).collect();
    for (sha_, branches, at) in [
        (&ex.backport_08, old_refs.clone(), "2017-10-26T11:40:02Z"),
        (&ex.backport_09, vec!["v0.9.3"], "2017-10-26T12:02:45Z"),
        (&ex.backport_16, vec!["v1.6.2"], "2017-10-25T16:31:50Z"),
    ] {
        w.commit(
            SyntheticCommit::new(
                "onelogin",
                "ruby-saml",
                sha_,
                &format!("{FIX_MESSAGE}\n\n(cherry picked from commit {})", ex.fix),
                &["lib/onelogin/ruby-saml/response.rb", "lib/onelogin/ruby-saml/utils.rb"],
                at,
            ),
            &branches,
        );
    }
    w.commit(
        SyntheticCommit::new(
            "onelogin",
            "ruby-saml",
            &sha("77ab12"),
            "Bump version to 1.6.2",
            &["lib/onelogin/ruby-saml/version.rb"],
            "2017-10-25T16:40:00Z",
        ),
        &["v1.6.2"],
    );
    w.commit(
        SyntheticCommit::new(
            "onelogin",
            "ruby-saml",
            &sha("c0ffee"),
            "Experiment with a new metadata parser",
            &["lib/onelogin/ruby-saml/idp_metadata_parser.rb"],
            "2017-10-20T10:00:00Z",
        ),
        &["metadata-rewrite"],
    );

    w.repo("forkuser", "ruby-saml", "master");
    w.commit(
        SyntheticCommit::new(
            "forkuser",
            "ruby-saml",
            &ex.fork,
            FIX_MESSAGE,
            &["lib/onelogin/ruby-saml/response.rb"],
            "2017-10-27T08:00:00Z",
        ),
        &["master"],
    );

    w.repo("samlbase", "samlbase", "master");
    w.commit(
        SyntheticCommit::new(
            "samlbase",
            "samlbase",
            &ex.samlbase_fix,
            "Ignore comments when reading NameID values",
            &["src/SAMLBase/Response.php"],
            "2017-12-18T14:12:00Z",
        ),
        &["master"],
    );

    w.repo("crewjam", "saml", "master");
    for (s, paths) in [
        (&ex.saml_tests[0], ["schema_test.go", "testdata/response_with_comment.xml"]),
        (&ex.saml_tests[1], ["xmlenc/decrypt_test.go", "xmlenc/testdata/cbc.xml"]),
    ] {
        w.commit(
            SyntheticCommit::new("crewjam", "saml", s, "Add tests for comments in assertions", &paths, "2018-01-09T20:00:00Z"),
            &["master"],
        );
    }
    (w, ex)
}
