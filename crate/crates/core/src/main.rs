use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modelfree::correspondence::{verify_correspondence, SourceGains};
use modelfree::experiments::{list_scenarios, parse_override, run_scenario, summary_text};
use modelfree::Error;

#[derive(Parser)]
#[command(name = "modelfree", version, about = "Model-free control scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a catalog scenario and write its records, metrics and summary.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Shorthand for `--override duration=S`.
        #[arg(long)]
        duration: Option<f64>,
        /// `key=value`, repeatable; see the summary of a run for the keys.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the catalog.
    List,
    /// Check the classic/intelligent gain correspondence on random errors.
    VerifyCorrespondence {
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        kp: f64,
        #[arg(long, default_value_t = 1.0)]
        ki: f64,
        #[arg(long, default_value_t = 0.5)]
        kd: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownScenario(_) | Error::InvalidConfig(_) | Error::NotReady(_) => 2,
        Error::Divergence { .. } | Error::NonFinite { .. } => 3,
        Error::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Command::Run { scenario, seed, out, duration, overrides } => {
            let mut ov = overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
            if let Some(d) = duration {
                ov.push(("duration".to_string(), d));
            }
            let (outcome, files) = run_scenario(&scenario, seed, &ov, &out)?;
            print!("{}", summary_text(&outcome));
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::List => print!("{}", list_scenarios()),
        Command::VerifyCorrespondence { h, alpha, kp, ki, kd, n, seed } => {
            let report = verify_correspondence(h, alpha, SourceGains { kp, ki, kd }, n, seed)?;
            print!("{report}");
            println!("max relative deviation {:.3e}", report.max_rel());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
