//! The regression behind one LSM exercise decision: realized discounted
//! cashflows against the fitted continuation value, as CSV on stdout.

use bcc_lsm::lsm::write_surface_csv;
use bcc_lsm::{continuation_surface, simulate, BccParams, FeatureSet, GridSpec, PricingOptions, PutContract, RegressorSpec};

fn main() -> bcc_lsm::Result<()> {
    let step: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = GridSpec { s0: 36.0, horizon: 1.0, steps: 20, paths: 2000, seed: 1, antithetic: true, moment_match: true };
    let grid = simulate(&BccParams::black_scholes(0.2, 0.06), &spec)?;
    let contract = PutContract { strike: 40.0, maturity: 1.0 };
    let options = PricingOptions::default();
    let rows = continuation_surface(&grid, &contract, &RegressorSpec::polynomial(), &options, step)?;
    eprintln!("{} in-the-money paths at step {step}", rows.len());
    write_surface_csv(&rows, FeatureSet::PriceOnly, std::io::stdout().lock()).map_err(|e| bcc_lsm::Error::io("<stdout>", e))
}
