//! `slelab run <config>` and `slelab validate <config>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slelab::runner::{self, ExperimentConfig, RunOptions, Severity};

#[derive(Parser)]
#[command(name = "slelab", version, about = "Run SLE experiments described by JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its outputs and manifest.
    Run {
        config: PathBuf,
        /// Replaces the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Replaces the config's seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List every problem with a config without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(runner::exit_code(&e) as u8)
    })
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let diags = runner::validate_json(&text);
            for d in &diags {
                let level = match d.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                println!("{level}: {}: {}", d.key, d.message);
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                ExitCode::from(2)
            } else {
                println!("ok");
                ExitCode::SUCCESS
            }
        }
        Command::Run { config, output_dir, seed_override, threads } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(seed) = seed_override {
                cfg.seed = seed;
            }
            let opts = threads.map_or_else(RunOptions::default, |threads| RunOptions { threads });
            match runner::run_with(&cfg, &opts) {
                Ok(m) => {
                    for w in &m.warnings {
                        eprintln!("warning: {}: {}", w.key, w.message);
                    }
                    for f in &m.outputs {
                        println!("{}  {}", f.sha256, cfg.output_dir.join(&f.file).display());
                    }
                    for t in &m.truncated {
                        eprintln!("truncated: {t}");
                    }
                    println!("manifest: {}", cfg.output_dir.join(runner::MANIFEST).display());
                    ExitCode::from(m.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(runner::exit_code(&e) as u8)
                }
            }
        }
    }
}
