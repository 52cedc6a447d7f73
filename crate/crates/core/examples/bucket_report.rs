//! Load the bundled chain, filter it and report pricing errors by maturity
//! and moneyness bucket at the parameters that generated it.

use std::path::Path;

use bcc_lsm::calibration::ChainObjective;
use bcc_lsm::config::RunConfig;
use bcc_lsm::{apply_filters, bucketize, load_chain, mse_report};

fn main() -> bcc_lsm::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = RunConfig::load(data.join("calibration.json"))?;
    let cal = config.calibration.as_ref().expect("bundled config has a calibration section");
    let loaded = load_chain(data.join("chain2.csv"), cal.spot, cal.quote_date)?;
    let quotes = apply_filters(&loaded.quotes);
    println!("{} quotes loaded, {} rejected, {} kept", loaded.quotes.len(), loaded.rejected.len(), quotes.len());
    for q in quotes.iter().take(5) {
        let b = bucketize(q)?;
        println!("  K {:>7.2} T {:.4} -> {:?} {:?}", q.strike, q.maturity_years, b.maturity, b.moneyness);
    }

    let setup = config.calibration_setup()?;
    for (label, params) in [("generating", config.model), ("sv without jumps", bcc_lsm::BccParams { lambda: 0.0, v0: 0.01, ..config.model })] {
        let prices = ChainObjective::new(&quotes, &setup.regressor, setup.grid, setup.pricing)?.prices(&params)?;
        let pairs: Vec<_> = quotes.iter().cloned().zip(prices).collect();
        println!("\n{label}:");
        print!("{}", mse_report(&pairs)?.to_csv_string());
    }
    Ok(())
}
