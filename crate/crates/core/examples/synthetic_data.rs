//! Writes a self-consistent data set: two put chains priced by LSM at known
//! parameters and a zero-coupon curve from the matching CIR rate model.
//!
//! ```text
//! cargo run --release --example synthetic_data -- crates/core/data
//! ```

use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;

use bcc_lsm::calibration::{cir_bond_price, synthetic_chain, CirParams};
use bcc_lsm::market_data::write_chain;
use bcc_lsm::{BccParams, GridSpec, OptionQuote, PricingOptions, RegressorSpec};
use chrono::{Duration, NaiveDate};

const SPOT: f64 = 250.0;

fn template(quote_date: NaiveDate, moneyness: &[f64]) -> Vec<OptionQuote> {
    let mut quotes = Vec::new();
    for days in [7, 14, 21, 28, 35, 42] {
        for m in moneyness {
            let expiry = quote_date + Duration::days(days);
            quotes.push(OptionQuote::new(quote_date, expiry, SPOT * m, 0.0, 100, SPOT).unwrap());
        }
    }
    quotes
}

fn main() -> bcc_lsm::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    fs::create_dir_all(&dir).map_err(|e| bcc_lsm::Error::io(&dir, e))?;

    let truth = BccParams::spy_lsm();
    let cir = CirParams::of(&truth);
    let quote_date = NaiveDate::from_ymd_opt(2017, 9, 5).unwrap();
    let mc = GridSpec { s0: SPOT, horizon: 0.1, steps: 10, paths: 2000, seed: 7, antithetic: true, moment_match: true };
    let spec = RegressorSpec::polynomial();
    let options = PricingOptions::default();

    let first = template(quote_date, &[0.97, 0.98, 0.99, 1.0, 1.01, 1.02, 1.03]);
    let second = template(quote_date, &[0.975, 0.985, 0.995, 1.005, 1.015, 1.025]);
    for (name, quotes) in [("chain.csv", first), ("chain2.csv", second)] {
        let priced = synthetic_chain(&truth, &quotes, &spec, &mc, &options)?;
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| bcc_lsm::Error::io(&path, e))?;
        write_chain(&priced, file)?;
        println!("{} quotes -> {}", priced.len(), path.display());
    }

    let path = dir.join("bonds.csv");
    let mut file = File::create(&path).map_err(|e| bcc_lsm::Error::io(&path, e))?;
    let mut body = String::from("maturity_years,price\n");
    for t in [1.0 / 365.0, 1.0 / 52.0, 1.0 / 12.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0] {
        body.push_str(&format!("{t},{}\n", cir_bond_price(&cir, t)?));
    }
    file.write_all(body.as_bytes()).map_err(|e| bcc_lsm::Error::io(&path, e))?;
    println!("bond curve -> {}", path.display());
    Ok(())
}
