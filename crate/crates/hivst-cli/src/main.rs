//! `hivst` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hivst::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "hivst", version, about = "HIV self-testing policy model")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Jurisdiction table (CSV).
    #[arg(long, global = true, value_name = "CSV")]
    pub jurisdictions: Option<PathBuf>,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "TOML")]
    pub config: Option<PathBuf>,
    /// Previously calibrated cohort (JSON written by `calibrate`), used in
    /// place of `--jurisdictions`.
    #[arg(long, global = true, value_name = "JSON")]
    pub calibrated: Option<PathBuf>,
    /// Output directory [default: config `output.dir`, else `out`].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Share of tests that are self-tests.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Relative increase in overall testing.
    #[arg(long, global = true)]
    pub chi: Option<f64>,
    #[arg(long, global = true, value_name = "MONTHS")]
    pub horizon_months: Option<f64>,
    #[arg(long, global = true, value_name = "MONTHS")]
    pub step_months: Option<f64>,
    /// Spacing of the gamma and chi grids.
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    /// Restrict the run to one jurisdiction.
    #[arg(long, global = true, value_name = "NAME")]
    pub jurisdiction: Option<String>,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Report errors on stderr as JSON.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// More logging (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive stage parameters for each jurisdiction.
    Calibrate,
    /// Reproduction numbers at baseline.
    Ngm,
    /// Simulate one policy and write trajectories.
    Simulate,
    /// Percent change in incidence over the gamma x chi grid.
    Sweep,
    /// Testing increase needed to offset self-testing, per gamma.
    Threshold,
    /// Compare re-simulated aggregates with the inputs and check the
    /// linearization against the nonlinear model.
    Validate,
    /// The full per-jurisdiction results table and scatter data.
    Report,
}

fn report_error(err: &Error, json: bool) {
    if json {
        let body = serde_json::json!({
            "error": {
                "kind": err.kind().as_str(),
                "exit_code": err.kind().exit_code(),
                "message": err.to_string(),
            }
        });
        eprintln!("{body}");
    } else {
        eprintln!("error: {err}");
    }
}

fn main() -> ExitCode {
    let json_requested = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json_requested {
                let text = e.to_string();
                let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                let err = Error::Config(first.to_string());
                report_error(&err, true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(ErrorKind::Config.exit_code() as u8);
        }
    };
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_error(&err, cli.opts.json_errors);
            ExitCode::from(err.kind().exit_code() as u8)
        }
    }
}
