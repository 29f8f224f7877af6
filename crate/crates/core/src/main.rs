// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

use clap::Parser;
use ptmpo::cli::{exit_code, run, Cli, EXIT_CONFIG, EXIT_OK};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let help = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            std::process::exit(if help { EXIT_OK } else { EXIT_CONFIG });
        }
    };
    if let Err(e) = run(&cli) {
        log::error!("{e}");
        std::process::exit(exit_code(&e));
    }
}
