use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use credit_response::pipeline::{self, RunConfig, OUT_ENV};
use credit_response::Result;

#[derive(Parser)]
#[command(version, about = "Simulate, fit and evaluate credit-limit response models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory shared by all stages
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,

    /// Comma-separated methods, e.g. `or_log,enc_or_log_l1`
    #[arg(long, global = true, value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test splits from the configured population and design
    Simulate,
    /// Fit every configured method on train.csv
    Train,
    /// Grouped RMAE on both splits
    Evaluate,
    /// Subgroup response curves and partial dependence tables
    Curves,
    /// All four stages
    Run,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(v) = &cli.variants {
        cfg.variants = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    match cli.command {
        Command::Simulate => {
            let m = pipeline::simulate(&cfg)?;
            for (name, hash) in &m.files {
                println!("{name}  {hash}");
            }
        }
        Command::Train => {
            let m = pipeline::train(&cfg)?;
            for name in m.files.keys() {
                println!("models/{name}");
            }
        }
        Command::Evaluate => print!("{}", pipeline::format_table(&pipeline::evaluate(&cfg)?)),
        Command::Curves => {
            for p in pipeline::curves(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Run => print!("{}", pipeline::format_table(&pipeline::run_all(&cfg)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
