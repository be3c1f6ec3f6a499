use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use parc_core::runner::{
    embed_pool, format_report, load_config, read_report, self_predict_pool, sweep, run_experiment,
    write_report, ExperimentConfig, RunManifest, RunOptions, RunnerError,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;

#[derive(Parser)]
#[command(name = "parc", version, about = "Retrieval-augmented cross-lingual in-context learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path config override, e.g. `limits.parallelism=2`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Evaluate at most N examples.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Embed the pool and write a binary pool file.
    EmbedPool {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output path; defaults to `<output_dir>/pool.bin`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label unlabeled pool entries with one template's zero-shot predictions.
    SelfPredict {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        template: String,
        /// Output path; defaults to `<output_dir>/pool-<template>.bin`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (template, k) cell and write the manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Render prompts without calling any backend.
        #[arg(long)]
        dry_run: bool,
    },
    /// Like `run`, plus a per-template F1 delta table against k = 0.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        dry_run: bool,
    },
    /// Print a manifest as tables.
    Report {
        /// Manifest file.
        manifest: Option<PathBuf>,
        /// Find the manifest for this config instead.
        #[arg(long, conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Dotted-path override applied to that config. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE", requires = "config")]
        overrides: Vec<String>,
        /// Print the raw JSON.
        #[arg(long)]
        json: bool,
    },
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, RunnerError> {
    let mut config = load_config(&args.config, &args.overrides)?;
    config.apply_env(|k| std::env::var(k).ok())?;
    if let Some(n) = args.limit {
        config.limits.max_examples = Some(n);
    }
    config.validate()?;
    Ok(config)
}

fn write_outputs(manifest: &RunManifest, dir: &Path, elapsed_ms: u128) -> anyhow::Result<PathBuf> {
    let path = write_report(manifest, dir)?;
    let timing = serde_json::json!({
        "manifest": manifest.file_name(),
        "elapsed_ms": elapsed_ms,
    });
    std::fs::write(path.with_extension("timing.json"), format!("{timing:#}\n"))?;
    if let Some(d) = &manifest.deltas {
        std::fs::write(path.with_extension("deltas.tsv"), d.to_tsv())?;
    }
    Ok(path)
}

fn execute(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::EmbedPool { config, out } => {
            let config = load(&config)?;
            let out = out.unwrap_or_else(|| config.output_dir.join("pool.bin"));
            let pool = embed_pool(&config, &out)?;
            println!("{} entries -> {} (checksum {})", pool.len(), out.display(), pool.checksum());
        }
        Command::SelfPredict { config, template, out } => {
            let config = load(&config)?;
            let out = out.unwrap_or_else(|| config.output_dir.join(format!("pool-{template}.bin")));
            let pool = self_predict_pool(&config, &template, &out)?;
            println!("{} entries -> {} (checksum {})", pool.len(), out.display(), pool.checksum());
        }
        Command::Run { config, dry_run } => return run(&config, dry_run, false),
        Command::Sweep { config, dry_run } => return run(&config, dry_run, true),
        Command::Report { manifest, config, overrides, json } => {
            let path = match (manifest, config) {
                (Some(p), _) => p,
                (None, Some(c)) => {
                    let config = load(&ConfigArgs {
                        config: c,
                        overrides,
                        limit: None,
                    })?;
                    config.output_dir.join(parc_core::runner::manifest_file_name(&config.hash()))
                }
                (None, None) => anyhow::bail!("give a manifest path or --config"),
            };
            let m = read_report(&path)?;
            if json {
                print!("{}", m.to_json());
            } else {
                print!("{}", format_report(&m));
            }
        }
    }
    Ok(0)
}

fn run(args: &ConfigArgs, dry_run: bool, with_deltas: bool) -> anyhow::Result<u8> {
    let config = load(args)?;
    let options = RunOptions { dry_run };
    let start = Instant::now();
    let manifest = if with_deltas {
        sweep(&config, options)?
    } else {
        run_experiment(&config, options)?
    };
    let path = write_outputs(&manifest, &config.output_dir, start.elapsed().as_millis())?;
    print!("{}", format_report(&manifest));
    println!("\nmanifest: {}", path.display());
    Ok(if manifest.incomplete { EXIT_INCOMPLETE } else { 0 })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("PARC_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<RunnerError>()
                .map_or(EXIT_CONFIG, |r| r.exit_code() as u8);
            ExitCode::from(code)
        }
    }
}
