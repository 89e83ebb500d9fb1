//! `cent`: batch driver for the CENT pipeline.
//!
//! Exit status is 0 on success, 2 for configuration or contract errors
//! (including missing inputs) and 1 for runtime failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use toml::Value as TomlValue;

use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cent",
    version,
    about = "Train CNNs, extract CENT features, evaluate them and check the entropy inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML file with one section per subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the seed of the selected subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Overrides one config field, e.g. `--set synth.extent=64`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Synth,
    /// Train a network on a dataset manifest.
    Train,
    /// Compute CENT features from a checkpoint or an activation dump.
    Extract,
    /// Cross-validate a random forest on a feature CSV.
    Evaluate,
    /// Cross-validate under permuted labels.
    Permute,
    /// Report the conditioning, partition and data-processing checks.
    Theory,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Train => "train",
            Command::Extract => "extract",
            Command::Evaluate => "evaluate",
            Command::Permute => "permute",
            Command::Theory => "theory",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut table = config::load_table(cli.config.as_deref())?;
    for o in &cli.overrides {
        config::apply_override(&mut table, o)?;
    }
    if let Some(seed) = cli.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| ConfigError::Invalid(format!("seed {seed} exceeds i64::MAX")))?;
        let (path, value): (&[&str], TomlValue) = match cli.command {
            Command::Synth => (&["synth", "seed"], seed.into()),
            Command::Train => (&["train", "seed"], seed.into()),
            Command::Evaluate => (&["evaluate", "seed"], seed.into()),
            Command::Permute => {
                let mut t = toml::Table::new();
                t.insert("seeded".into(), seed.into());
                (&["permute", "permutation"], TomlValue::Table(t))
            }
            Command::Theory => (&["theory", "markov", "seed"], seed.into()),
            Command::Extract => {
                log::warn!("extract is deterministic; --seed is ignored");
                return config::parse(table);
            }
        };
        config::set_path(&mut table, path, value)?;
    }
    config::parse(table)
}

fn run(cli: &Cli) -> Result<Value> {
    let cfg = load_config(cli)?;
    let name = cli.command.name();
    let echo = config::to_toml(&cfg);
    log::info!("effective configuration:\n{echo}");
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let cfg_path = cli.out.join(format!("{name}_config.toml"));
    std::fs::write(&cfg_path, &echo).with_context(|| format!("writing {}", cfg_path.display()))?;

    let out = cli.out.as_path();
    let start = Instant::now();
    let mut summary = match cli.command {
        Command::Synth => commands::synth(&cfg.synth, out),
        Command::Train => commands::train_cmd(&cfg.train, out),
        Command::Extract => commands::extract(&cfg.extract, out),
        Command::Evaluate => commands::evaluate(&cfg.evaluate, out),
        Command::Permute => commands::permute(&cfg.evaluate, &cfg.permute, out),
        Command::Theory => commands::theory(&cfg.theory, out),
    }
    .with_context(|| format!("{name} failed"))?;
    log::info!("{name} finished in {:.1}s", start.elapsed().as_secs_f64());
    summary["command"] = json!(name);
    summary["config"] = json!(cfg_path);
    Ok(summary)
}

/// 2 when any error in the chain is a configuration problem or a library
/// contract violation, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        e.is::<ConfigError>()
            || e.downcast_ref::<cent_core::Error>()
                .is_some_and(cent_core::Error::is_contract)
    });
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
