mod config;
mod gen;
mod replay;
mod run;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status classes: 1 usage/config, 2 dataset, 3 internal.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Dataset(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Dataset(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Dataset(e) | Failure::Internal(e) => e,
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub fn dataset(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Dataset(e.into())
}

pub fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "iagents",
    version,
    about = "Informative multi-agent runs over information-asymmetric social networks"
)]
pub struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark dataset.
    Gen(gen::GenArgs),
    /// Run agents over datasets and write trajectories and a report.
    Run(RunArgs),
    /// Print graph, planning or memory-behavior statistics.
    Stats(stats::StatsArgs),
    /// Render a trajectory log as a readable transcript.
    Replay(replay::ReplayArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset directory (network.txt, messages.tsv, tasks.jsonl); repeatable.
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
    /// Chat provider: remote, scripted or extractive-fallback.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Replay script file, or a directory of `<task_id>.jsonl` scripts.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub max_turns: Option<u32>,
    #[arg(long)]
    pub depth_limit: Option<u32>,
    #[arg(long)]
    pub no_infonav: bool,
    #[arg(long)]
    pub no_clear_memory: bool,
    #[arg(long)]
    pub no_fuzzy_memory: bool,
    #[arg(long)]
    pub no_recursion: bool,
    #[arg(long)]
    pub privacy_prompt: bool,
    /// JSON object mapping old names to new names.
    #[arg(long, value_name = "MAP_FILE")]
    pub anonymize: Option<PathBuf>,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Score text answers with the judge prompt instead of normalized matching.
    #[arg(long)]
    pub judge: bool,
}

fn load_config(cli: &Cli) -> Result<config::FileConfig, Failure> {
    match &cli.config {
        Some(p) => config::FileConfig::load(p).map_err(usage),
        None => Ok(config::FileConfig::default()),
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    let file = load_config(&cli)?;
    let seed = cli.seed.or(file.seed);
    let out = cli.out.clone().or(file.out.clone());
    match cli.command {
        Command::Gen(args) => gen::cmd_gen(&args, &file, seed.unwrap_or(0), out.unwrap_or_else(|| PathBuf::from("out"))),
        Command::Run(args) => run::cmd_run(&args, &file, seed, out.unwrap_or_else(|| PathBuf::from("out"))),
        Command::Stats(args) => stats::cmd_stats(&args),
        Command::Replay(args) => replay::cmd_replay(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_env("IAGENTS_LOG")
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
