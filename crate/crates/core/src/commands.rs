//! The subcommands behind the `bcc-lsm` binary. Each writes its console
//! output to `out` and its files under the given directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::binomial::{binomial_put, BsSetup};
use crate::calibration::{calibrate, CalibrationReport, ChainObjective};
use crate::config::{CalibrationSection, RunConfig};
use crate::engine::{martingale_diagnostic, simulate, GridSpec, PathGrid};
use crate::error::{Error, Result};
use crate::lsm::{continuation_surface, price_american_put, PricingOptions, PricingResult};
use crate::market_data::{apply_filters, load_bonds, load_chain, mse_report, BucketReport, OptionQuote};
use crate::regressors::{fit, predict, RegressorSpec};

pub const REPORT_JSON: &str = "calibration_report.json";
pub const IN_SAMPLE_CSV: &str = "bucket_report.csv";
pub const OUT_OF_SAMPLE_CSV: &str = "bucket_report_oos.csv";
pub const PATHS_CSV: &str = "paths.csv";
pub const FITDEMO_CSV: &str = "fitdemo.csv";
pub const BENCHMARK_CSV: &str = "benchmark.csv";
pub const PRICE_JSON: &str = "price.json";

fn console(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    w.write_all(body).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Price the configured contract.
pub fn cmd_price(config: &RunConfig, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<PricingResult> {
    let grid = simulate(&config.model, &config.grid)?;
    let result = price_american_put(&grid, &config.contract, &config.regressor, &config.pricing)?;
    writeln!(out, "price      {:.6}", result.price).map_err(console)?;
    writeln!(out, "std_error  {:.6}", result.std_error).map_err(console)?;
    writeln!(out, "wall_time  {:.3}s", result.wall_time).map_err(console)?;
    writeln!(out, "regressor  {}", result.regressor.name()).map_err(console)?;
    if let Some(dir) = out_dir {
        write_file(dir, PRICE_JSON, serde_json::to_string_pretty(&result)?.as_bytes())?;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub price: f64,
    /// Zero for the tree.
    pub std_error: f64,
    /// Seconds.
    pub time: f64,
}

/// Binomial reference and the three LSM regressors on one shared grid.
pub fn cmd_benchmark(seed: Option<u64>, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<Vec<BenchmarkRow>> {
    let config = RunConfig::benchmark().with_seed(seed);
    let setup = BsSetup::benchmark();
    let started = Instant::now();
    let reference = binomial_put(&setup)?;
    let mut rows = vec![BenchmarkRow {
        method: format!("binomial ({} steps)", setup.steps),
        price: reference,
        std_error: 0.0,
        time: started.elapsed().as_secs_f64(),
    }];
    let started = Instant::now();
    let grid = simulate(&config.model, &config.grid)?;
    let simulation = started.elapsed().as_secs_f64();
    for spec in [RegressorSpec::polynomial(), RegressorSpec::boosted_trees(), RegressorSpec::mlp()] {
        let r = price_american_put(&grid, &config.contract, &spec, &config.pricing)?;
        rows.push(BenchmarkRow {
            method: format!("lsm {}", spec.name()),
            price: r.price,
            std_error: r.std_error,
            time: simulation + r.wall_time,
        });
    }
    writeln!(out, "{:<22} {:>9} {:>9} {:>9}", "method", "price", "std_err", "time_s").map_err(console)?;
    for r in &rows {
        writeln!(out, "{:<22} {:>9.4} {:>9.4} {:>9.3}", r.method, r.price, r.std_error, r.time).map_err(console)?;
    }
    if let Some(dir) = out_dir {
        let mut csv = String::from("method,price,std_error,time\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{}\n", r.method, r.price, r.std_error, r.time));
        }
        write_file(dir, BENCHMARK_CSV, csv.as_bytes())?;
    }
    Ok(rows)
}

/// Simulate the configured grid and report the martingale check; with
/// `dump_paths` the full grid is written as CSV.
pub fn cmd_simulate(config: &RunConfig, dump_paths: bool, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<PathGrid> {
    let grid = simulate(&config.model, &config.grid)?;
    let (mean, se) = martingale_diagnostic(&grid);
    writeln!(out, "paths {} steps {} horizon {}", grid.paths(), grid.steps(), grid.horizon()).map_err(console)?;
    writeln!(out, "mean discounted terminal index {mean:.6} (se {se:.6}, s0 {})", grid.s0).map_err(console)?;
    if dump_paths {
        let dir = out_dir.unwrap_or(Path::new("."));
        let (path, mut w) = create(dir, PATHS_CSV)?;
        grid.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        writeln!(out, "wrote {}", path.display()).map_err(console)?;
    }
    Ok(grid)
}

fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let headers = reader.headers().map_err(|e| Error::Csv { path: path.into(), source: e })?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (cx, cy) = (col("x")?, col("y")?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let parse = |c: usize| {
            record
                .get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::invalid(format!("{}: line {}: bad number", path.display(), i + 2)))
        };
        xs.push(parse(cx)?);
        ys.push(parse(cy)?);
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput("fit demo data"));
    }
    Ok((xs, ys))
}

/// Regression sample from the benchmark: moneyness of in-the-money paths
/// halfway to expiry against their realized discounted cashflows.
fn benchmark_sample(seed: Option<u64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut config = RunConfig::benchmark().with_seed(seed);
    config.grid.paths = 5_000;
    let grid = simulate(&config.model, &config.grid)?;
    let rows = continuation_surface(&grid, &config.contract, &config.regressor, &config.pricing, config.grid.steps / 2)?;
    Ok(rows.iter().map(|r| (r.features[0], r.target)).unzip())
}

/// Fit all three regressors to one-dimensional data (the `x,y` CSV at
/// `input`, or a benchmark continuation sample) and write
/// `x,y,yhat_poly,yhat_trees,yhat_mlp` sorted by `x`.
pub fn cmd_fitdemo(input: Option<&Path>, seed: Option<u64>, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<PathBuf> {
    let (xs, ys) = match input {
        Some(p) => read_xy(p)?,
        None => benchmark_sample(seed)?,
    };
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let x = DMatrix::from_iterator(xs.len(), 1, order.iter().map(|&i| xs[i]));
    let y: Vec<f64> = order.iter().map(|&i| ys[i]).collect();

    let mlp = match RegressorSpec::mlp() {
        RegressorSpec::Mlp { hidden_layers, batch_size, epochs, learning_rate, tolerance, patience, .. } => RegressorSpec::Mlp {
            hidden_layers,
            batch_size,
            epochs,
            learning_rate,
            seed: seed.unwrap_or(0),
            tolerance,
            patience,
        },
        other => other,
    };
    let mut fitted = Vec::new();
    for spec in [RegressorSpec::polynomial(), RegressorSpec::boosted_trees(), mlp] {
        let model = fit(&spec, &x, &y)?;
        let yhat = predict(&model, &x)?;
        let mse = yhat.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
        writeln!(out, "{:<14} in-sample mse {mse:.6}", spec.name()).map_err(console)?;
        fitted.push(yhat);
    }

    let dir = out_dir.unwrap_or(Path::new("."));
    let mut body = String::from("x,y,yhat_poly,yhat_trees,yhat_mlp\n");
    for i in 0..y.len() {
        body.push_str(&format!("{},{},{},{},{}\n", x[(i, 0)], y[i], fitted[0][i], fitted[1][i], fitted[2][i]));
    }
    let path = write_file(dir, FITDEMO_CSV, body.as_bytes())?;
    writeln!(out, "wrote {} rows to {}", y.len(), path.display()).map_err(console)?;
    Ok(path)
}

fn section(config: &RunConfig) -> Result<&CalibrationSection> {
    config
        .calibration
        .as_ref()
        .ok_or_else(|| Error::invalid("config needs a calibration section with spot and quote_date"))
}

fn pick<'a>(flag: Option<&'a Path>, configured: Option<&'a PathBuf>, what: &str) -> Result<&'a Path> {
    flag.or(configured.map(PathBuf::as_path))
        .ok_or_else(|| Error::invalid(format!("no {what} given (flag or config)")))
}

/// Load and filter a chain, failing when nothing survives.
fn filtered_chain(path: &Path, cal: &CalibrationSection, out: &mut dyn Write) -> Result<Vec<OptionQuote>> {
    let loaded = load_chain(path, cal.spot, cal.quote_date)?;
    for bad in &loaded.rejected {
        writeln!(out, "{}: skipped {bad}", path.display()).map_err(console)?;
    }
    let kept = apply_filters(&loaded.quotes);
    writeln!(out, "{}: {} quotes, {} after filters", path.display(), loaded.quotes.len(), kept.len()).map_err(console)?;
    if kept.is_empty() {
        return Err(Error::EmptyInput("no quotes survive the filters"));
    }
    Ok(kept)
}

fn price_report(
    quotes: &[OptionQuote],
    params: &crate::engine::BccParams,
    spec: &RegressorSpec,
    mc: &GridSpec,
    options: &PricingOptions,
) -> Result<BucketReport> {
    let prices = ChainObjective::new(quotes, spec, *mc, *options)?.prices(params)?;
    let pairs: Vec<(OptionQuote, f64)> = quotes.iter().cloned().zip(prices).collect();
    mse_report(&pairs)
}

/// Paths of the files written by [`cmd_calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutputs {
    pub report: CalibrationReport,
    pub report_json: PathBuf,
    pub in_sample: PathBuf,
    pub out_of_sample: Option<PathBuf>,
}

/// Calibrate to a chain and bond curve, then write the report JSON and the
/// in-sample (and, with `chain2`, out-of-sample) bucket reports.
pub fn cmd_calibrate(
    config: &RunConfig,
    chain: Option<&Path>,
    chain2: Option<&Path>,
    bonds: Option<&Path>,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<CalibrationOutputs> {
    let cal = section(config)?;
    let chain_path = pick(chain, cal.chain.as_ref(), "chain")?;
    let bonds_path = pick(bonds, cal.bonds.as_ref(), "bond curve")?;
    let chain2_path = chain2.or(cal.chain2.as_deref());
    let bonds = load_bonds(bonds_path)?;
    let quotes = filtered_chain(chain_path, cal, out)?;
    let second = chain2_path.map(|p| filtered_chain(p, cal, out)).transpose()?;

    let setup = config.calibration_setup()?;
    let report = calibrate(&quotes, &bonds, &setup)?;
    let params = report.final_params;
    let in_sample = price_report(&quotes, &params, &setup.regressor, &setup.grid, &setup.pricing)?;

    let dir = out_dir.unwrap_or(Path::new("."));
    let report_json = write_file(dir, REPORT_JSON, report.to_json()?.as_bytes())?;
    let in_sample_path = write_file(dir, IN_SAMPLE_CSV, in_sample.to_csv_string().as_bytes())?;
    let out_of_sample = match &second {
        Some(q) => {
            let r = price_report(q, &params, &setup.regressor, &setup.grid, &setup.pricing)?;
            writeln!(out, "out-of-sample mse {:.6e}", r.overall_mse).map_err(console)?;
            Some(write_file(dir, OUT_OF_SAMPLE_CSV, r.to_csv_string().as_bytes())?)
        }
        None => None,
    };

    for s in &report.stages {
        writeln!(
            out,
            "stage {}: objective {:.6e} -> {:.6e} ({} evaluations, {:.1}s)",
            s.stage, s.objective_in, s.objective_out, s.evaluations, s.wall_time
        )
        .map_err(console)?;
    }
    for s in &report.skipped {
        writeln!(out, "stage {} skipped: {}", s.stage, s.reason).map_err(console)?;
    }
    writeln!(out, "final parameters {}", serde_json::to_string(&params)?).map_err(console)?;
    writeln!(out, "in-sample mse {:.6e}", in_sample.overall_mse).map_err(console)?;
    writeln!(out, "wrote {}", report_json.display()).map_err(console)?;
    Ok(CalibrationOutputs { report, report_json, in_sample: in_sample_path, out_of_sample })
}

/// Price a chain at the configured model parameters and write the bucketed
/// error report (to `out` when no directory is given).
pub fn cmd_report(config: &RunConfig, chain: Option<&Path>, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<BucketReport> {
    let cal = section(config)?;
    let chain_path = pick(chain, cal.chain.as_ref(), "chain")?;
    let quotes = filtered_chain(chain_path, cal, out)?;
    let setup = config.calibration_setup()?;
    let report = price_report(&quotes, &config.model, &setup.regressor, &setup.grid, &setup.pricing)?;
    match out_dir {
        Some(dir) => {
            let path = write_file(dir, IN_SAMPLE_CSV, report.to_csv_string().as_bytes())?;
            writeln!(out, "overall mse {:.6e}; wrote {}", report.overall_mse, path.display()).map_err(console)?;
        }
        None => out.write_all(report.to_csv_string().as_bytes()).map_err(console)?,
    }
    Ok(report)
}

/// Process exit status for a command result: 0 success, 2 file-system
/// failures, 1 everything else.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_io() => 2,
        Err(_) => 1,
    }
}
