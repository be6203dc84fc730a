use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use cvrisk_cli::args::Cli;
use cvrisk_cli::{render_csv, run, write_artifacts, CliError, CliResult};

/// Environment variable holding the worker-thread count.
const THREADS_VAR: &str = "CVRISK_THREADS";

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| CliError::Config(format!("{THREADS_VAR} must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> CliResult<bool> {
    configure_threads()?;
    let cfg = cli.into_config()?;
    let art = run(&cfg)?;
    match &cfg.out {
        Some(out) => {
            for path in write_artifacts(&art, out, cfg.format)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for (_, bytes) in render_csv(&art)? {
                stdout.write_all(&bytes)?;
            }
        }
    }
    Ok(!art.failed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
