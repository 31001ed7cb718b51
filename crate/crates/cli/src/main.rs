//! `t2sql`: generate text-to-SQL datasets, benchmark models on them and
//! compare query results.
//!
//! Exit codes: 0 success or a Correct verdict, 1 pipeline/benchmark failure
//! or a mismatch, 2 usage or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use t2sql_core::bench::ReportFormat;

#[derive(Parser)]
#[command(
    name = "t2sql",
    version,
    about = "Text-to-SQL dataset generation and execution-match benchmarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the generation pipeline and write records, stage log and manifest.
    Generate(GenerateArgs),
    /// Score a model on the test split of a dataset.
    Benchmark(BenchmarkArgs),
    /// Compare two result tables (JSON or CSV) and print the verdict.
    Compare(CompareArgs),
    /// Re-split a dataset into train and test with a new seed or ratio.
    Split(SplitArgs),
}

#[derive(clap::Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Validate the configuration and prompt templates, then stop.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelKind {
    /// Answers with the ground-truth SQL.
    Echo,
    /// Answers with the ground-truth SQL minus its last column.
    DropLastColumn,
    /// The chat-completion model configured under [llm].
    Llm,
}

#[derive(clap::Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "echo")]
    pub model: ModelKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    pub format: ReportFormat,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-record audit JSONL; defaults to `<out_dir>/benchmark_audit.jsonl`.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Model name shown in the report.
    #[arg(long)]
    pub label: Option<String>,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Strict,
    Multiset,
}

#[derive(clap::Args)]
pub struct CompareArgs {
    pub truth: PathBuf,
    pub candidate: PathBuf,
    #[arg(long, value_enum, default_value = "multiset")]
    pub mode: ModeArg,
    /// Relative tolerance for decimal cells; 0 compares exactly.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(clap::Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("T2S_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Benchmark(args) => commands::benchmark(args),
        Command::Compare(args) => commands::compare(args),
        Command::Split(args) => commands::split(args),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
