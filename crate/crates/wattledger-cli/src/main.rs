//! `wattledger` — turn power telemetry into energy, marginal-energy, and
//! emissions numbers, and package them into transparent reports.
//!
//! Exit codes: 0 on success, 1 for usage problems (bad flags, missing
//! required values), 2 for data problems (unreadable files, traces that
//! do not cover the requested window, reports that fail validation).

mod args;
mod commands;
mod config;
mod io;

use clap::Parser;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version are not errors; everything else is a
            // usage problem.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match commands::run(cli) {
        Ok(()) => 0,
        Err(err) => {
            if err.downcast_ref::<config::UsageError>().is_some() {
                eprintln!("usage error: {err}");
                1
            } else {
                eprintln!("error: {err:#}");
                2
            }
        }
    }
}
