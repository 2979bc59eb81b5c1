use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sspt::generator::dataset_stats;
use sspt::index::InvertedIndex;
use sspt_cli::*;

#[derive(Parser)]
#[command(name = "sspt", version, about = "Span-selection instance generation and a toy pointer-network reader")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for gradient computation (default 1)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for artifacts and reports
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    index: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    min_score: Option<f64>,
    #[arg(long, global = true)]
    impossible_target: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Read the corpus and report document and passage counts
    Ingest,
    /// Build the passage index and write it to disk
    Index,
    /// Generate the span-selection dataset
    Generate,
    /// Summarize a generated dataset
    Stats,
    /// Train the reader on the training split
    Train,
    /// Evaluate a checkpoint on the held-out split
    Eval,
    /// Compare related and unrelated answer-bearing passages
    SwapExperiment,
    /// Run ingest, index, generate, train, eval and the swap experiment
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Index => "index",
            Command::Generate => "generate",
            Command::Stats => "stats",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::SwapExperiment => "swap-experiment",
            Command::All => "all",
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out.clone(),
        corpus: cli.corpus.clone(),
        index: cli.index.clone(),
        checkpoint: cli.checkpoint.clone(),
        min_score: cli.min_score,
        impossible_target: cli.impossible_target,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = load_config(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(1))
        .build_global()
        .context("cannot start worker threads")?;
    let name = cli.command.name();
    let seed = cfg.seed;
    match cli.command {
        Command::Ingest => to_json(name, seed, load_corpus(&cfg)?.report()),
        Command::Index => {
            let corpus = load_corpus(&cfg)?;
            let index = InvertedIndex::build(&corpus.passages)?;
            write_index(&index, &cfg.index_path())?;
            to_json(name, seed, index_report(&index))
        }
        Command::Generate => {
            let corpus = load_corpus(&cfg)?;
            let index = load_or_build_index(&cfg, &corpus.passages)?;
            let (instances, generation) = generate(&cfg, &corpus, &index)?;
            write_dataset(&instances, &cfg.dataset_path())?;
            write_generation_report(&generation, &cfg.generation_report_path())?;
            to_json(name, seed, GenerateReport { dataset: dataset_stats(&instances), generation })
        }
        Command::Stats => {
            let instances = read_dataset(&cfg.dataset_path())?;
            let generation = read_generation_report(&cfg.generation_report_path())?;
            to_json(name, seed, GenerateReport { dataset: dataset_stats(&instances), generation })
        }
        Command::Train => {
            let split = split_dataset(&cfg, &read_dataset(&cfg.dataset_path())?)?;
            let trained = train_model(&cfg, &split.train)?;
            write_checkpoint(&trained.checkpoint, &cfg.checkpoint_path())?;
            write_loss_trace(&trained.trace, &cfg.loss_path())?;
            to_json(name, seed, trained.report)
        }
        Command::Eval => {
            let split = split_dataset(&cfg, &read_dataset(&cfg.dataset_path())?)?;
            let checkpoint = read_checkpoint(&cfg.checkpoint_path())?;
            to_json(name, seed, evaluate_model(&checkpoint, &split.eval)?)
        }
        Command::SwapExperiment => {
            let split = split_dataset(&cfg, &read_dataset(&cfg.dataset_path())?)?;
            let checkpoint = read_checkpoint(&cfg.checkpoint_path())?;
            let corpus = load_corpus(&cfg)?;
            let index = load_or_build_index(&cfg, &corpus.passages)?;
            to_json(name, seed, swap_experiment(&cfg, &checkpoint, &split.eval, &corpus, &index)?)
        }
        Command::All => to_json(name, seed, run_all(&cfg)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SSPT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
