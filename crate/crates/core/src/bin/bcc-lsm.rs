use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bcc_lsm::commands::{self, exit_code};
use bcc_lsm::config::RunConfig;
use bcc_lsm::Result;
use clap::{Parser, Subcommand};

/// American put pricing by least-squares Monte Carlo under stochastic
/// volatility, stochastic rates and jumps.
#[derive(Debug, Parser)]
#[command(name = "bcc-lsm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Option chain CSV (expiry,strike,bid,ask,volume).
    #[arg(long, global = true)]
    chain: Option<PathBuf>,
    /// Second chain priced out of sample at the fitted parameters.
    #[arg(long, global = true)]
    chain2: Option<PathBuf>,
    /// Zero-coupon curve CSV (maturity_years,price).
    #[arg(long, global = true)]
    bonds: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write every simulated path (simulate only).
    #[arg(long, global = true)]
    dump_paths: bool,
    /// `x,y` CSV for fitdemo; defaults to a benchmark regression sample.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the configured contract.
    Price,
    /// Binomial reference against the three LSM regressors.
    Benchmark,
    /// Simulate paths and check the discounted index is a martingale.
    Simulate,
    /// Compare the three regressors on one-dimensional data.
    Fitdemo,
    /// Four-stage calibration to a chain and a bond curve.
    Calibrate,
    /// Bucketed pricing errors of a chain at the configured parameters.
    Report,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| bcc_lsm::Error::InvalidParameter("--config is required".into()))?;
    Ok(RunConfig::load(path)?.with_seed(cli.seed))
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let dir = cli.out.as_deref();
    match cli.command {
        Command::Price => commands::cmd_price(&load(cli)?, dir, out).map(drop),
        Command::Benchmark => commands::cmd_benchmark(cli.seed, dir, out).map(drop),
        Command::Simulate => commands::cmd_simulate(&load(cli)?, cli.dump_paths, dir, out).map(drop),
        Command::Fitdemo => commands::cmd_fitdemo(cli.input.as_deref(), cli.seed, dir, out).map(drop),
        Command::Calibrate => commands::cmd_calibrate(
            &load(cli)?,
            cli.chain.as_deref(),
            cli.chain2.as_deref(),
            cli.bonds.as_deref(),
            dir,
            out,
        )
        .map(drop),
        Command::Report => commands::cmd_report(&load(cli)?, cli.chain.as_deref(), dir, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let result = run(&cli, &mut stdout.lock());
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
