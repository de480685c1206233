//! Batch benchmark CLI over the attribution engine.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use attriq::bench::{execute, Command, Invocation, EXIT_INTERNAL, EXIT_OK};
use attriq::io::ReportFormat;

#[derive(Parser)]
#[command(
    name = "attriq",
    version,
    about = "Post-hoc attributions and attribution-quality metrics for tabular and image models"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Write per-instance attribution reports for every configured explainer
    Explain(RunArgs),
    /// Score every configured explainer with the metric suite
    Evaluate(RunArgs),
    /// Build the explainer-by-metric matrix with per-cell provenance
    Benchmark(RunArgs),
    /// Check the config, model, data, and identifiers without computing
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports and the manifest
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Report format: csv, json, or markdown
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Worker threads (defaults to the number of cores)
    #[arg(long, env = "ATTRIQ_JOBS")]
    jobs: Option<usize>,
    /// Log progress and diagnostics
    #[arg(long)]
    verbose: bool,
}

fn main() {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        CliCommand::Explain(a) => (Command::Explain, a),
        CliCommand::Evaluate(a) => (Command::Evaluate, a),
        CliCommand::Benchmark(a) => (Command::Benchmark, a),
        CliCommand::Validate(a) => (Command::Validate, a),
    };
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if args.verbose { "info" } else { "warn" }),
    )
    .init();
    let invocation = Invocation {
        command,
        config_path: args.config,
        seed: args.seed,
        out_dir: args.out,
        format: args.format,
        jobs: args.jobs,
    };
    let code = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(&invocation)))
        .unwrap_or(EXIT_INTERNAL);
    if code != EXIT_OK {
        std::process::exit(code);
    }
}
