//! `susmine`: sustainability assessment of object-centric event logs.
//!
//! Exit status: 0 on success, 1 for analysis or data errors, 2 for I/O,
//! syntax and usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use susmine_core::generator::GeneratorConfig;
use susmine_core::inventory::RollupLevel;

use crate::config::{CommonArgs, FileConfig, RunConfig};

#[derive(Parser)]
#[command(name = "susmine", version, about = "Life-cycle sustainability analysis of OCEL 2.0 event logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Own,
    ActivityType,
    ObjectType,
    Process,
}

#[derive(Subcommand)]
enum Command {
    /// Check a log against the OCEL subset and its integrity rules.
    Validate(CommonArgs),
    /// Run the full pipeline and write report, CSVs, ledger and DOT graph.
    Assess(CommonArgs),
    /// Print or write the flow inventory.
    Inventory {
        #[command(flatten)]
        common: CommonArgs,
        /// Roll flows up to this level.
        #[arg(long, value_enum, default_value = "own")]
        level: Level,
    },
    /// Print or write the allocation ledger.
    Allocate(CommonArgs),
    /// Emit the directly-follows graph as DOT, annotated when a bundle is given.
    Dfg(CommonArgs),
    /// Pattern-coverage matrix of a bundle, or the literature review matrix.
    Audit {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        literature: bool,
        /// Row label for the audited bundle.
        #[arg(long)]
        name: Option<String>,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded synthetic log, bundle and ground truth.
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        /// Number of events.
        #[arg(long)]
        size: Option<usize>,
        /// Draw allocation fractions below 1.
        #[arg(long)]
        partial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn resolve(common: CommonArgs) -> Result<RunConfig, ExitCode> {
    RunConfig::resolve(common).map_err(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

fn dispatch(command: Command) -> Result<Result<()>, ExitCode> {
    Ok(match command {
        Command::Validate(c) => commands::validate(&resolve(c)?),
        Command::Assess(c) => commands::assess_cmd(&resolve(c)?),
        Command::Inventory { common, level } => {
            let level = match level {
                Level::Own => None,
                Level::ActivityType => Some(RollupLevel::ActivityType),
                Level::ObjectType => Some(RollupLevel::ObjectType),
                Level::Process => Some(RollupLevel::Process),
            };
            commands::inventory_cmd(&resolve(common)?, level)
        }
        Command::Allocate(c) => commands::allocate_cmd(&resolve(c)?),
        Command::Dfg(c) => commands::dfg_cmd(&resolve(c)?),
        Command::Audit { common, literature, name, json } => {
            commands::audit_cmd(&resolve(common)?, literature, name, json)
        }
        Command::Generate { seed, size, partial, out, config } => {
            let file = FileConfig::load(config.as_deref()).map_err(|e| {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            })?;
            let gen = seed.or(file.seed).context("--seed is required").map(|seed| GeneratorConfig {
                seed,
                size: size.or(file.size).unwrap_or(GeneratorConfig::default().size),
                partial_allocation: partial || file.partial.unwrap_or(false),
            });
            let out = out.or(file.out).unwrap_or_else(|| PathBuf::from("generated"));
            match gen {
                Ok(gen) => commands::generate_cmd(&out, &gen),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return Err(ExitCode::from(2));
                }
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Err(code) => code,
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
