//! `gcss`: runs the trace, sweep, SHG and post-selection experiments from a
//! TOML config and writes CSV/JSON artifacts.
//!
//! stdout carries one JSON summary line; progress goes to stderr.
//! Exit codes: 0 ok, 2 configuration or I/O error, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "gcss", version, about = "Coherent-state superposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; defaults apply to every missing key
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel sections
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate the config and print the resolved parameters without computing
    #[arg(long, global = true)]
    dry_run: bool,
    /// Include simulation truth in qspec outputs
    #[arg(long, global = true)]
    with_truth: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// 2-AC / 2-IAC traces of the coherent, GCSS and mixture states
    Trace,
    /// s_zero and M over a grid of |α| and |δα|
    Sweep,
    /// Second-harmonic generation and harmonic-mode Wigner functions
    Shg,
    /// Synthetic post-selection batch and P_n histogram
    Qspec,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::Sweep => "sweep",
            Command::Shg => "shg",
            Command::Qspec => "qspec",
        }
    }
}

fn exit_code(e: &gcss::Error) -> u8 {
    if e.is_config() || matches!(e, gcss::Error::Io(_)) {
        2
    } else {
        3
    }
}

fn resolve(cli: &Cli) -> gcss::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> gcss::Result<serde_json::Value> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(gcss::Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| gcss::Error::Config(e.to_string()))?;
    }
    if cli.dry_run {
        return Ok(json!({ "dry_run": true, "config": cfg }));
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| gcss::Error::Io(format!("{}: {e}", cfg.out.display())))?;
    match cli.command {
        Command::Trace => commands::trace(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Shg => commands::shg(&cfg),
        Command::Qspec => commands::qspec(&cfg, cli.with_truth),
    }
}

/// Summary line on stdout; a closed pipe is not an error.
fn emit(v: &serde_json::Value) {
    let _ = writeln!(std::io::stdout(), "{v}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(&cli) {
        Ok(mut summary) => {
            summary["command"] = json!(name);
            summary["status"] = json!("ok");
            emit(&summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("gcss {name}: {e}");
            emit(&json!({ "command": name, "status": "error", "exit_code": code, "message": e.to_string() }));
            ExitCode::from(code)
        }
    }
}
