use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hartree_core::cli::{self, ExitStatus, Overrides};

#[derive(Parser)]
#[command(
    name = "hartree",
    version,
    about = "Two-component Hartree ground states and interaction sweeps"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coupled system for every interaction strength in the config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, strictly increasing list.
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// 0 uses all cores.
        #[arg(long)]
        threads: Option<String>,
        /// `direct` or `fast`.
        #[arg(long)]
        conv: Option<String>,
        /// `uniform`, `gaussian` or `from-file:<path>`.
        #[arg(long)]
        init: Option<String>,
    },
}

fn main() -> ExitCode {
    let Command::Solve {
        config,
        kappa,
        out,
        threads,
        conv,
        init,
    } = Args::parse().command;
    let overrides = Overrides {
        kappa,
        out,
        threads,
        conv,
        init,
    };
    let cfg = match cli::parse_config(&config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(ExitStatus::ConfigError as u8);
        }
    };
    match cli::run_sweep(&cfg) {
        Ok((status, outcome)) => {
            for p in &outcome.points {
                let r = &p.record;
                println!(
                    "kappa = {:<8} mu = ({:.6}, {:.6})  D0 = {:.6e}  outer = {}  pm = {}",
                    r.kappa, r.mu[0], r.mu[1], r.d0, r.outer_iterations, r.pm_iterations
                );
            }
            if let Some((kappa, e)) = &outcome.failure {
                eprintln!("error: kappa = {kappa}: {e}");
            }
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::of_error(&e) as u8)
        }
    }
}
