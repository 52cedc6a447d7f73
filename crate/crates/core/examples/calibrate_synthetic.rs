//! Four-stage calibration on the bundled synthetic chain and bond curve.
//! An optional argument raises the simplex budget per stage.

use std::path::Path;

use bcc_lsm::config::RunConfig;
use bcc_lsm::engine::PARAM_NAMES;
use bcc_lsm::{apply_filters, calibrate, load_bonds, load_chain};

fn main() -> bcc_lsm::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = RunConfig::load(data.join("calibration.json"))?;
    let cal = config.calibration.as_ref().expect("bundled config has a calibration section");
    let quotes = apply_filters(&load_chain(data.join("chain.csv"), cal.spot, cal.quote_date)?.quotes);
    let bonds = load_bonds(data.join("bonds.csv"))?;

    let mut setup = config.calibration_setup()?;
    if let Some(budget) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        setup.optimizer.max_evaluations = budget;
    }
    let report = calibrate(&quotes, &bonds, &setup)?;
    for s in &report.stages {
        println!(
            "stage {}  {:.4e} -> {:.4e}  {:>4} evaluations  {:.1}s",
            s.stage, s.objective_in, s.objective_out, s.evaluations, s.wall_time
        );
    }
    println!("\n{:<8} {:>10} {:>10}", "", "fitted", "truth");
    for ((name, fitted), truth) in PARAM_NAMES.iter().zip(report.final_params.to_array()).zip(config.model.to_array()) {
        println!("{name:<8} {fitted:>10.4} {truth:>10.4}");
    }
    Ok(())
}
