//! A small labelled corpus covering each cardinality and the failure modes
//! the variants are meant to expose. The worked example is its first entry.

use super::worked_example::worked_example_world;
use super::{sha, SyntheticCommit, World};

pub const CORPUS_CVES: &[&str] = &[
    "CVE-2017-11428",
    "CVE-2019-10001",
    "CVE-2019-10002",
    "CVE-2019-10003",
    "CVE-2019-10004",
    "CVE-2019-10005",
    "CVE-2019-10006",
    "CVE-2019-10007",
    "CVE-2019-10008",
    "CVE-2019-10009",
    "CVE-2019-10010",
    "CVE-2019-10011",
    "CVE-2019-10012",
    "CVE-2019-10013",
];

pub const SVN_REVISION: &str = "https://svn.apache.org/viewvc?view=revision&revision=1834567";

fn page(urls: &[&str]) -> String {
    let links: String = urls.iter().map(|u| format!("<li><a href=\"{u}\">{u}</a></li>\n")).collect();
    format!("<html><body><ul>\n{links}</ul></body></html>\n")
}

#[allow(clippy::too_many_arguments)]
fn add(w: &mut World, owner: &str, repo: &str, key: &str, message: &str, paths: &[&str], at: &str, branches: &[&str]) -> String {
    w.commit(SyntheticCommit::new(owner, repo, &sha(key), message, paths, at), branches)
}

/// Every corpus CVE in one world.
pub fn corpus_world() -> World {
    let (mut w, _) = worked_example_world();

    // Direct NVD reference to a single fix.
    w.repo("acme", "widget", "master");
    let a1 = add(&mut w, "acme", "widget", "a1a1a1", "Fix heap overflow in header parser", &["src/parser.c"], "2019-03-01T10:00:00Z", &["master"]);
    add(&mut w, "acme", "widget", "a1a1b2", "Update README", &["README.md"], "2019-03-02T10:00:00Z", &["master"]);
    w.nvd("CVE-2019-10001", &[&a1], &["cpe:2.3:a:acme:widget:*:*:*:*:*:*:*:*"]);

    // Only reachable through hybrid -> tracker issue -> commit.
    w.repo("foo", "foolib", "main");
    let b1 = add(&mut w, "foo", "foolib", "b1b1b1", "FOO-12: validate chunk length before copy", &["lib/chunk.c"], "2019-04-10T09:00:00Z", &["main"]);
    let blog = "https://blog.example.net/posts/foolib-advisory";
    let jira = "https://issues.example.org/browse/FOO-12";
    w.nvd("CVE-2019-10002", &[blog], &["cpe:2.3:a:foo:foolib:*:*:*:*:*:*:*:*"]);
    w.page(blog, &page(&[jira]));
    w.page(jira, &page(&[&b1]));

    // Debian -> GitHub issue -> commit.
    w.repo("bar", "barlib", "master");
    let c1 = add(&mut w, "bar", "barlib", "c1c1c1", "Reject negative sizes in decoder", &["src/decode.c"], "2019-05-02T12:00:00Z", &["master"]);
    let bar_issue = "https://github.com/bar/barlib/issues/7";
    let oss = "https://www.openwall.com/lists/oss-security/2019/05/01/1";
    w.nvd("CVE-2019-10003", &[oss], &["cpe:2.3:a:bar:barlib:*:*:*:*:*:*:*:*"]);
    w.page(oss, &page(&[]));
    w.debian("CVE-2019-10003", &[bar_issue]);
    w.page(bar_issue, &page(&[&c1]));

    // Main fix plus one backport in a repository with 150 branches.
    w.repo("baz", "bazd", "main");
    let msg = "Check session token length in handshake";
    let d1 = add(&mut w, "baz", "bazd", "d1d1d1", msg, &["src/handshake.go"], "2019-06-01T08:00:00Z", &["main"]);
    add(&mut w, "baz", "bazd", "d2d2d2", msg, &["src/handshake.go"], "2019-06-04T08:00:00Z", &["release-1.x"]);
    for i in 0..148 {
        w.branch("baz", "bazd", &format!("feature-{i:03}"));
    }
    w.nvd("CVE-2019-10004", &[&d1], &["cpe:2.3:a:baz:bazd:*:*:*:*:*:*:*:*"]);

    // Pull-request commits versus the merge commit.
    w.repo("qix", "qix", "master");
    let e1 = add(&mut w, "qix", "qix", "e1e1e1", "Escape attribute values in template renderer", &["qix/render.py"], "2019-07-01T10:00:00Z", &["master"]);
    let e2 = add(&mut w, "qix", "qix", "e2e2e2", "Escape attribute names as well", &["qix/render.py"], "2019-07-01T11:00:00Z", &["master"]);
    let mut merge = SyntheticCommit::new("qix", "qix", &sha("e3e3e3"), "Merge pull request #88 from dev/escape", &[], "2019-07-02T09:00:00Z");
    merge.parents = 2;
    w.commit(merge, &["master"]);
    w.nvd("CVE-2019-10005", &[&e1, &e2], &["cpe:2.3:a:qix:qix:*:*:*:*:*:*:*:*"]);

    // Fix and follow-up eight days later on a maintenance branch.
    w.repo("zed", "zedserver", "main");
    let f1 = add(&mut w, "zed", "zedserver", "f1f1f1", "Bound the reader buffer", &["server/reader.c"], "2019-08-01T00:00:00Z", &["2.x"]);
    add(&mut w, "zed", "zedserver", "f2f2f2", "Follow-up for CVE-2019-10006: bound the writer buffer too", &["server/writer.c"], "2019-08-09T00:00:00Z", &["2.x"]);
    add(&mut w, "zed", "zedserver", "f3f3f3", "Tidy log output", &["server/log.c"], "2019-08-05T00:00:00Z", &["2.x"]);
    w.nvd("CVE-2019-10006", &[&f1], &["cpe:2.3:a:zed:zedserver:*:*:*:*:*:*:*:*"]);

    // Backports at +25 and +31 days.
    w.repo("gee", "geelib", "master");
    let msg = "Do not follow symlinks when extracting archives";
    let g1 = add(&mut w, "gee", "geelib", "a0a0a1", msg, &["src/extract.c"], "2019-09-01T00:00:00Z", &["master"]);
    add(&mut w, "gee", "geelib", "a0a0a2", msg, &["src/extract.c"], "2019-09-26T00:00:00Z", &["1.x"]);
    add(&mut w, "gee", "geelib", "a0a0a3", msg, &["src/extract.c"], "2019-10-02T00:00:00Z", &["0.9.x"]);
    w.nvd("CVE-2019-10007", &[&g1], &["cpe:2.3:a:gee:geelib:*:*:*:*:*:*:*:*"]);

    // Two repositories.
    w.repo("qux", "libqux", "master");
    w.repo("qux", "qux-python", "master");
    let h1 = add(&mut w, "qux", "libqux", "b0b0b1", "Fix integer overflow in qux_alloc", &["src/alloc.c"], "2019-10-10T00:00:00Z", &["master"]);
    let h2 = add(&mut w, "qux", "qux-python", "b0b0b2", "Guard allocation size in bindings", &["qux/_alloc.py"], "2019-10-11T00:00:00Z", &["master"]);
    w.nvd("CVE-2019-10008", &[&h1, &h2], &["cpe:2.3:a:qux:libqux:*:*:*:*:*:*:*:*"]);

    // Only hybrids; the fix is unreachable.
    w.repo("yak", "yak", "master");
    add(&mut w, "yak", "yak", "c0c0c1", "Sanitize redirect targets", &["yak/redirect.js"], "2019-11-01T00:00:00Z", &["master"]);
    let yak1 = "https://security.example.com/yak-2019-001";
    let yak2 = "https://lists.example.com/yak-announce/2019/11";
    w.nvd("CVE-2019-10009", &[yak1], &["cpe:2.3:a:yak:yak:*:*:*:*:*:*:*:*"]);
    w.page(yak1, &page(&[yak2]));
    w.page(yak2, &page(&[]));

    // Red Hat Bugzilla comments carry the fix.
    w.repo("quux", "quuxd", "master");
    let k1 = add(&mut w, "quux", "quuxd", "c1d2e3", "Drop privileges before parsing config", &["src/main.c"], "2019-12-01T00:00:00Z", &["master"]);
    let rh = "https://access.redhat.com/security/cve/cve-2019-10010";
    w.nvd("CVE-2019-10010", &[rh], &["cpe:2.3:a:quux:quuxd:*:*:*:*:*:*:*:*"]);
    w.page(rh, &page(&[]));
    let comments: [&str; 3] = [
        "Created attachment for the reproducer.",
        "Upstream issue acknowledged by the maintainers.",
        &format!("Upstream fix: {k1}"),
    ];
    w.redhat("CVE-2019-10010", &[(1_700_001, &comments)]);

    // SVN revision.
    w.nvd("CVE-2019-10011", &[SVN_REVISION], &["cpe:2.3:a:apache:http_server:*:*:*:*:*:*:*:*"]);
    w.page(
        SVN_REVISION,
        "<html><body><pre class=\"vc_log\">Reject invalid chunk extensions</pre>\n<table>\n\
<tr><th>Path</th><th>Details</th></tr>\n\
<tr><td><a href=\"/viewvc/httpd/trunk/modules/http/chunk_filter.c?view=markup\">/httpd/trunk/modules/http/chunk_filter.c</a></td><td>modified</td></tr>\n\
</table></body></html>\n",
    );

    // Real fix sits past the search result window.
    w.repo("capd", "capd", "master");
    add(&mut w, "capd", "capd", "d0d0d1", "Fix CVE-2019-10012 in the capability parser", &["src/caps.c"], "2020-01-01T00:00:00Z", &["master"]);
    let cap_adv = "https://capd.example.org/security";
    w.nvd("CVE-2019-10012", &[cap_adv], &["cpe:2.3:a:capd:capd:*:*:*:*:*:*:*:*"]);
    w.page(cap_adv, &page(&[]));
    let noise: Vec<SyntheticCommit> = (0..1005)
        .map(|i| {
            SyntheticCommit::new(
                &format!("mirror{i:04}"),
                "archive",
                &sha(&format!("e{i:04}")),
                "Import CVE-2019-10012 advisory text",
                &["advisories/CVE-2019-10012.txt"],
                "2020-01-02T00:00:00Z",
            )
        })
        .collect();
    w.extra_search_hits("CVE-2019-10012", noise);

    // Fix four hops out: news -> GitHub issue -> commit.
    w.repo("lark", "larkd", "master");
    let g1 = add(&mut w, "lark", "larkd", "a9a9a9", "Bound the session table lookup", &["src/session.go"], "2019-06-11T08:00:00Z", &["master"]);
    let news = "https://news.example.com/2019/06/larkd-session-bug";
    let lark_issue = "https://github.com/lark/larkd/issues/31";
    w.nvd("CVE-2019-10013", &[news], &["cpe:2.3:a:lark:larkd:*:*:*:*:*:*:*:*"]);
    w.page(news, &page(&[lark_issue]));
    w.page(lark_issue, &page(&[&g1]));
    w
}

/// Hand-checked ground truth for [`corpus_world`].
pub fn corpus_truth() -> String {
    let (_, ex) = worked_example_world();
    let c = |owner: &str, repo: &str, key: &str| format!("{owner}/{repo}@{}", sha(key));
    let lines = [
        "# schema: patchnet.truth/1".to_string(),
        ex.truth_line(),
        format!("CVE-2019-10001 SP {{{}}}", c("acme", "widget", "a1a1a1")),
        format!("CVE-2019-10002 SP {{{}}}", c("foo", "foolib", "b1b1b1")),
        format!("CVE-2019-10003 SP {{{}}}", c("bar", "barlib", "c1c1c1")),
        format!("CVE-2019-10004 MB {{{}}} | {{{}}}", c("baz", "bazd", "d1d1d1"), c("baz", "bazd", "d2d2d2")),
        format!(
            "CVE-2019-10005 MEP {{{}, {}}} | {{{}}}",
            c("qix", "qix", "e1e1e1"),
            c("qix", "qix", "e2e2e2"),
            c("qix", "qix", "e3e3e3")
        ),
        format!("CVE-2019-10006 MP {{{}}} | {{{}}}", c("zed", "zedserver", "f1f1f1"), c("zed", "zedserver", "f2f2f2")),
        format!(
            "CVE-2019-10007 MB {{{}}} | {{{}}} | {{{}}}",
            c("gee", "geelib", "a0a0a1"),
            c("gee", "geelib", "a0a0a2"),
            c("gee", "geelib", "a0a0a3")
        ),
        format!("CVE-2019-10008 MR {{{}}} | {{{}}}", c("qux", "libqux", "b0b0b1"), c("qux", "qux-python", "b0b0b2")),
        format!("CVE-2019-10009 SP {{{}}}", c("yak", "yak", "c0c0c1")),
        format!("CVE-2019-10010 SP {{{}}}", c("quux", "quuxd", "c1d2e3")),
        format!("CVE-2019-10011 SP {{{SVN_REVISION}}}"),
        format!("CVE-2019-10012 SP {{{}}}", c("capd", "capd", "d0d0d1")),
        format!("CVE-2019-10013 SP {{{}}}", c("lark", "larkd", "a9a9a9")),
    ];
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
