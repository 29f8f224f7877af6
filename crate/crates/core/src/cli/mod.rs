// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Batch command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O or
//! file format error.

pub mod bench;
pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ptmpo", version, about = "Process tensor construction, dynamics, control and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML). `compare` accepts it several times.
    #[arg(long, global = true)]
    pub config: Vec<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and save a process tensor.
    BuildPt,
    /// Observables under the drift Hamiltonian.
    Dynamics,
    /// Optimize control channels against the target state.
    Optimize,
    /// Compare methods; the first configuration is the reference.
    Compare,
    /// Timing scaling with bond dimension and memory cutoff.
    Bench,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Format(_) | Error::Version { .. } => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
        other => other,
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn single(cli: &Cli) -> Result<RunConfig> {
    match cli.config.as_slice() {
        [path] => load(cli, path),
        [] => Err(Error::Config("--config is required".into())),
        _ => Err(Error::Config("this subcommand takes a single --config".into())),
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::BuildPt => {
            let cfg = single(cli)?;
            cfg.validate()?;
            commands::cmd_build_pt(&cfg)?;
        }
        Command::Dynamics => {
            let cfg = single(cli)?;
            cfg.validate()?;
            commands::cmd_dynamics(&cfg)?;
        }
        Command::Optimize => {
            let cfg = single(cli)?;
            cfg.validate()?;
            commands::cmd_optimize(&cfg)?;
        }
        Command::Compare => {
            let cfgs = cli.config.iter().map(|p| Ok((load(cli, p)?, Some(p.to_path_buf())))).collect::<Result<Vec<_>>>()?;
            let report = commands::cmd_compare(&cfgs)?;
            for m in &report.methods {
                log::info!("{}: observable deviation {:.3e}", m.method, m.observable_deviation);
            }
        }
        Command::Bench => {
            let cfg = single(cli)?;
            let b = cfg.bench.clone().unwrap_or_default();
            let report = bench::run_bench(&b, cfg.seed)?;
            std::fs::create_dir_all(&cfg.output.dir)?;
            report.write(&cfg.output.dir)?;
            for s in &report.slopes {
                println!("{}: slope {:.3} over {}..={}", s.phase.name(), s.slope, s.min_size, s.max_size);
            }
        }
    }
    Ok(())
}
