//! Command-line surface. Run flags mirror `RunConfig` one to one.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchnet_core::extract::SourceExtensions;
use patchnet_core::report::RunConfig;
use patchnet_core::selection::ConnectivityVariant;
use patchnet_core::sources::SourceId;
use patchnet_core::transport::{TransportMode, TransportPolicy};

pub const GITHUB_TOKEN_ENV: &str = "GITHUB_TOKEN";

#[derive(Debug, Parser)]
#[command(name = "patchnet", version, about = "Find the patch commits of a CVE through its reference network")]
pub struct Cli {
    /// Report store directory.
    #[arg(long, global = true, default_value = "patchnet-store", env = "PATCHNET_STORE")]
    pub store: PathBuf,
    /// Log filter, e.g. `info` or `patchnet_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace one CVE and save the report.
    Trace {
        cve: String,
        #[command(flatten)]
        run: RunArgs,
        /// Print the full report instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Trace every CVE listed in a file (one id per line, `#` comments).
    Batch {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score traces against a ground-truth file.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        json: bool,
    },
    /// Run a variant grid over a ground-truth file.
    Sweep {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = Grid::Full)]
        grid: Grid,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        json: bool,
    },
    /// Render the network of a stored report.
    Export {
        cve: String,
        #[arg(long, value_enum, default_value_t = ExportFormat::Dot)]
        format: ExportFormat,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Serve the report store over HTTP for the review UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Override the store configuration's transport with fixtures.
        #[arg(long, value_name = "DIR")]
        replay: Option<PathBuf>,
        /// Override the store configuration's cache directory.
        #[arg(long, value_name = "DIR", conflicts_with = "replay")]
        cache: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Ablation,
    Depth,
    Span,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Dot,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Full,
    Length,
    Number,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 5)]
    pub depth: u32,
    #[arg(long, default_value_t = 30)]
    pub span: u32,
    /// Advisory sources to use.
    #[arg(long, value_delimiter = ',', default_value = "nvd,debian,redhat,github")]
    pub sources: Vec<SourceId>,
    /// Direct references only.
    #[arg(long)]
    pub flat: bool,
    #[arg(long)]
    pub no_confidence: bool,
    #[arg(long)]
    pub no_connectivity: bool,
    #[arg(long, value_enum, default_value_t = Variant::Full)]
    pub connectivity: Variant,
    /// Keep candidates within the top K distinct connectivity levels.
    #[arg(long, default_value_t = 1)]
    pub top_k: usize,
    /// Select every candidate patch.
    #[arg(long)]
    pub select_all: bool,
    #[arg(long)]
    pub no_expansion: bool,
    /// Replay recorded fixtures only; never touch the network.
    #[arg(long, value_name = "DIR")]
    pub replay: Option<PathBuf>,
    /// Cache live responses in DIR and reuse them.
    #[arg(long, value_name = "DIR", conflicts_with = "replay")]
    pub cache: Option<PathBuf>,
    /// Requests per minute per host.
    #[arg(long, default_value_t = 60)]
    pub rate_limit: u32,
    /// Source-file extensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub extensions: Option<Vec<String>>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Shuffle fetch scheduling with this seed.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
}

/// Adds the GitHub credential from the environment.
pub fn with_token(mut policy: TransportPolicy) -> TransportPolicy {
    if let Ok(token) = std::env::var(GITHUB_TOKEN_ENV) {
        if !token.trim().is_empty() {
            policy.auth_tokens.insert("api.github.com".into(), token.trim().to_string());
        }
    }
    policy
}

pub fn transport_policy(replay: Option<&PathBuf>, cache: Option<&PathBuf>, rate_limit: u32) -> TransportPolicy {
    let policy = match (replay, cache) {
        (Some(dir), _) => TransportPolicy::replay(dir.clone()),
        (None, Some(dir)) => TransportPolicy {
            mode: TransportMode::CacheThenLive,
            cache_dir: Some(dir.clone()),
            ..TransportPolicy::default()
        },
        (None, None) => TransportPolicy { mode: TransportMode::Live, ..TransportPolicy::default() },
    };
    with_token(TransportPolicy { rate_limit, ..policy })
}

impl RunArgs {
    pub fn run_config(&self, store: &std::path::Path) -> RunConfig {
        let mut c = RunConfig {
            depth_limit: self.depth,
            span_days: self.span,
            sources: self.sources.iter().copied().collect::<BTreeSet<_>>(),
            flat: self.flat,
            expansion_enabled: !self.no_expansion,
            transport: transport_policy(self.replay.as_ref(), self.cache.as_ref(), self.rate_limit),
            output_dir: Some(store.to_path_buf()),
            workers: self.workers,
            fetch_shuffle_seed: self.shuffle_seed,
            ..RunConfig::default()
        };
        c.selection.use_confidence = !self.no_confidence;
        c.selection.use_connectivity = !self.no_connectivity;
        c.selection.connectivity_variant = match self.connectivity {
            Variant::Full => ConnectivityVariant::Full,
            Variant::Length => ConnectivityVariant::PathLengthOnly,
            Variant::Number => ConnectivityVariant::PathNumberOnly,
        };
        c.selection.top_k = self.top_k;
        c.selection.select_all = self.select_all;
        if let Some(exts) = &self.extensions {
            c.extensions = SourceExtensions::new(exts);
        }
        c
    }
}
