//! `ars548` — listen, record, replay, export, configure and simulate.
//!
//! Exit status: 0 on success, 1 on runtime failure (sockets, files, an
//! unconfirmed configuration), 2 on usage errors. Log verbosity comes from
//! `ARS548_TOOLKIT_LOG` (error, warn, info, debug; default warn).
//!
//! Filter expressions are `key=value` terms joined by `&`:
//!
//! ```text
//! min_speed_kmh=<non-negative number>   keep objects strictly faster
//! class=<CAR|TRUCK|PEDESTRIAN|...>      keep objects whose dominant class matches
//! moving_only=<true|false>              keep objects not flagged stationary
//! ```

mod args;
mod commands;
mod export;

use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::Parser;

use args::{Cli, Command};

/// Invalid input detected after argument parsing; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARS548_TOOLKIT_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
            log::warn!("cannot install interrupt handler: {e}");
        }
    }

    let result = match cli.command {
        Command::Listen(a) => commands::listen(a, &stop),
        Command::Configure(a) => commands::configure(a),
        Command::Simulate(a) => commands::simulate(a, &stop),
        Command::Record(a) => commands::record(a, &stop),
        Command::Replay(a) => commands::replay(a, &stop),
        Command::Export(a) => commands::export(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
