//! Reference extraction: URL harvesting, node classification, tracking
//! identifiers, and the commit filters used while building the network.

mod classify;
mod cpe;
mod filters;
mod links;

pub use classify::{
    classify_reference, commit_ref_from_url, extract_tracking_identifiers, github_repo, is_github_issue,
    IdentifierKind, NodeKind, TrackingIdentifier,
};
pub use cpe::{cpe_name_match, name_match, tokenize_name};
pub use filters::{is_source_path, is_test_or_nonsource_only, is_test_path, SourceExtensions};
pub use links::{extract_urls, ExtractedReference, Via};
