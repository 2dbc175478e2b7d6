//! NVD 1.1 yearly JSON feeds (`nvdcve-1.1-<year>.json[.gz]`).

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{expect_success, AdvisoryDocument, SourceError, SourceId, Sources};
use crate::cve::CveId;

#[derive(Deserialize)]
struct Feed {
    #[serde(rename = "CVE_Items", default)]
    items: Vec<Item>,
}

#[derive(Deserialize)]
struct Item {
    cve: Cve,
    #[serde(default)]
    configurations: Option<Configurations>,
}

#[derive(Deserialize)]
struct Cve {
    #[serde(rename = "CVE_data_meta")]
    meta: Meta,
    #[serde(default)]
    references: Option<References>,
    #[serde(default)]
    description: Option<Description>,
}

#[derive(Deserialize)]
struct Meta {
    #[serde(rename = "ID")]
    id: String,
}

#[derive(Deserialize)]
struct References {
    #[serde(default)]
    reference_data: Vec<Reference>,
}

#[derive(Deserialize)]
struct Reference {
    url: String,
}

#[derive(Deserialize)]
struct Description {
    #[serde(default)]
    description_data: Vec<DescriptionData>,
}

#[derive(Deserialize)]
struct DescriptionData {
    #[serde(default)]
    value: String,
}

#[derive(Deserialize)]
struct Configurations {
    #[serde(default)]
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct Node {
    #[serde(default)]
    children: Vec<Node>,
    #[serde(default)]
    cpe_match: Vec<CpeMatch>,
}

#[derive(Deserialize)]
struct CpeMatch {
    #[serde(rename = "cpe23Uri")]
    cpe23_uri: String,
}

fn collect_cpes(nodes: &[Node], out: &mut Vec<String>) {
    for node in nodes {
        out.extend(node.cpe_match.iter().map(|m| m.cpe23_uri.clone()));
        collect_cpes(&node.children, out);
    }
}

struct Entry {
    references: Vec<String>,
    cpes: Vec<String>,
    description: String,
}

pub(super) struct NvdFeed {
    entries: HashMap<String, Entry>,
    fetched_at: DateTime<Utc>,
    snapshot: Option<String>,
}

impl NvdFeed {
    pub(super) fn advisory(&self, cve: &CveId) -> Result<AdvisoryDocument, SourceError> {
        let entry = self
            .entries
            .get(cve.as_str())
            .ok_or_else(|| SourceError::NotFound(format!("{cve} not in NVD feed")))?;
        let mut raw_fields = BTreeMap::new();
        raw_fields.insert("references".to_string(), entry.references.join("\n"));
        raw_fields.insert("cpes".to_string(), entry.cpes.join("\n"));
        raw_fields.insert("description".to_string(), entry.description.clone());
        if let Some(snapshot) = &self.snapshot {
            raw_fields.insert("feed_snapshot".to_string(), snapshot.clone());
        }
        Ok(AdvisoryDocument { source: SourceId::Nvd, cve_id: cve.clone(), raw_fields, fetched_at: self.fetched_at })
    }
}

pub(super) fn feed_url(sources: &Sources, year: u16) -> String {
    sources.endpoints.nvd_feed.replace("{year}", &year.to_string())
}

pub(super) fn load_feed(sources: &Sources, year: u16) -> Result<NvdFeed, SourceError> {
    let url = feed_url(sources, year);
    let resp = sources.get(&url)?;
    expect_success(&resp, &url)?;
    let bytes = maybe_gunzip(&resp.body).map_err(|e| SourceError::parse(&url, e))?;
    let feed = parse_feed(&bytes).map_err(|e| SourceError::parse(&url, e))?;
    Ok(NvdFeed {
        entries: feed,
        fetched_at: resp.recorded_at,
        snapshot: resp.snapshot.clone(),
    })
}

fn maybe_gunzip(body: &[u8]) -> std::io::Result<Vec<u8>> {
    if body.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(body).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(body.to_vec())
    }
}

fn parse_feed(bytes: &[u8]) -> Result<HashMap<String, Entry>, serde_json::Error> {
    let feed: Feed = serde_json::from_slice(bytes)?;
    Ok(feed
        .items
        .into_iter()
        .map(|item| {
            let references = item
                .cve
                .references
                .map(|r| r.reference_data.into_iter().map(|d| d.url).collect())
                .unwrap_or_default();
            let mut cpes = Vec::new();
            if let Some(conf) = &item.configurations {
                collect_cpes(&conf.nodes, &mut cpes);
            }
            cpes.dedup();
            let description = item
                .cve
                .description
                .and_then(|d| d.description_data.into_iter().next())
                .map(|d| d.value)
                .unwrap_or_default();
            (item.cve.meta.id.to_ascii_uppercase(), Entry { references, cpes, description })
        })
        .collect())
}
