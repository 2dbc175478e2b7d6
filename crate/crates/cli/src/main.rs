use std::process::ExitCode;

use clap::Parser;
use patchnet_cli::args::{Cli, Command};
use patchnet_cli::commands::{self, EXIT_FATAL};
use patchnet_cli::serve::{serve, ServeOptions};
use tracing_subscriber::EnvFilter;

fn run(cli: Cli) -> anyhow::Result<i32> {
    let store = cli.store.as_path();
    match cli.command {
        Command::Trace { cve, run, json } => commands::trace(store, &cve, &run.run_config(store), json),
        Command::Batch { file, run } => commands::batch(store, &file, &run.run_config(store)),
        Command::Evaluate { truth, run, json } => commands::evaluate(&truth, &run.run_config(store), json),
        Command::Sweep { truth, grid, run, json } => commands::sweep(&truth, grid, &run.run_config(store), json),
        Command::Export { cve, format, output } => commands::export(store, &cve, format, output.as_deref()),
        Command::Serve { bind, replay, cache } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(store, bind, ServeOptions { replay, cache }))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL as u8)
        }
    }
}
