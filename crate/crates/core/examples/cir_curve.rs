//! CIR zero-coupon prices and a fit of the rate parameters back from the
//! curve they generate.

use bcc_lsm::calibration::implied_short_rate;
use bcc_lsm::{calibrate_cir, cir_bond_price, CirParams, OptimizerConfig, ZeroBondQuote};

fn main() -> bcc_lsm::Result<()> {
    let truth = CirParams { kappa_r: 0.123, theta_r: 0.066, sigma_r: 0.001, r0: 0.01 };
    let maturities = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0, 30.0];
    let mut bonds = Vec::new();
    println!("{:>6} {:>10} {:>8}", "T", "price", "yield");
    for t in maturities {
        let price = cir_bond_price(&truth, t)?;
        println!("{t:>6} {price:>10.6} {:>8.4}", -price.ln() / t);
        bonds.push(ZeroBondQuote { maturity_years: t, price });
    }

    let fit = calibrate_cir(&bonds, truth.r0, &OptimizerConfig::default())?;
    println!("\nknown r0: {:?}", fit.params);
    println!("sse {:.3e} after {} evaluations", fit.objective, fit.evaluations);

    let r0 = implied_short_rate(&bonds)?;
    let fit = calibrate_cir(&bonds, r0, &OptimizerConfig::default())?;
    println!("r0 from the 3-month bond ({r0:.5}): {:?}", fit.params);
    println!("sse {:.3e}", fit.objective);
    Ok(())
}
