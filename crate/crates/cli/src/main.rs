mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::analyze::AnalyzeCommand;
use crate::commands::corpus::{GenCorpusArgs, SynthArgs};
use crate::commands::probes::TrainArgs;
use crate::commands::report::ReportArgs;
use crate::config::RunConfig;
use crate::output::{CmdResult, ExitCode as _, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "probelens", version, about = "Layer-wise position probing pipeline")]
struct Cli {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for per-layer computations (default: all cores).
    #[arg(long, global = true, env = "PROBELENS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a KV or MDQA prompt corpus and split it into train/test.
    GenCorpus(GenCorpusArgs),
    /// Write synthetic train/test archives with a planted or absent signal.
    Synth(SynthArgs),
    /// Check an archive and its manifest, listing every defect.
    ValidateArchive {
        archive: PathBuf,
    },
    /// Train position probes at every layer.
    TrainProbes(TrainArgs),
    /// Run one downstream analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Run every analysis whose inputs are available and summarize them.
    Report(ReportArgs),
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .exit(EXIT_CONFIG)?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref()).exit(EXIT_CONFIG)?;
    match cli.command {
        Command::GenCorpus(a) => commands::corpus::gen_corpus(&mut cfg, &a),
        Command::Synth(a) => commands::corpus::synth(&mut cfg, &a),
        Command::ValidateArchive { archive } => commands::corpus::validate(&archive),
        Command::TrainProbes(a) => commands::probes::train_probes(&mut cfg, &a),
        Command::Analyze(a) => commands::analyze::analyze(&mut cfg, &a),
        Command::Report(a) => commands::report::report(&mut cfg, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
