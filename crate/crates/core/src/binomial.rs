//! Cox-Ross-Rubinstein binomial tree for American puts under constant
//! volatility and rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsSetup {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub sigma: f64,
    pub steps: usize,
}

impl BsSetup {
    /// S0 = 36, K = 40, T = 1, r = 6%, sigma = 20%, 500 steps.
    pub fn benchmark() -> Self {
        BsSetup { s0: 36.0, strike: 40.0, maturity: 1.0, rate: 0.06, sigma: 0.2, steps: 500 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.strike > 0.0) {
            return Err(Error::invalid("s0 and strike must be positive"));
        }
        if !(self.sigma > 0.0 && self.maturity > 0.0) {
            return Err(Error::invalid("sigma and maturity must be positive"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        Ok(())
    }
}

fn tree(setup: &BsSetup, american: bool) -> Result<f64> {
    setup.validate()?;
    let n = setup.steps;
    let dt = setup.maturity / n as f64;
    let u = (setup.sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = (setup.rate * dt).exp();
    let p = (growth - d) / (u - d);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "risk-neutral probability {p:.6} outside (0, 1); use more steps"
        )));
    }
    let disc = 1.0 / growth;
    let payoff = |j: usize, level: usize| {
        let s = setup.s0 * u.powi(j as i32) * d.powi((level - j) as i32);
        (setup.strike - s).max(0.0)
    };

    // values[j]: node with j up-moves
    let mut values: Vec<f64> = (0..=n).map(|j| payoff(j, n)).collect();
    for level in (0..n).rev() {
        for j in 0..=level {
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = if american { cont.max(payoff(j, level)) } else { cont };
        }
    }
    Ok(values[0])
}

/// American put value on a CRR tree.
pub fn binomial_put(setup: &BsSetup) -> Result<f64> {
    tree(setup, true)
}

/// Same tree without early exercise.
pub fn binomial_european_put(setup: &BsSetup) -> Result<f64> {
    tree(setup, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_value() {
        let v = binomial_put(&BsSetup::benchmark()).unwrap();
        assert!((v - 4.486).abs() < 0.005, "{v}");
    }

    #[test]
    fn one_step_by_hand() {
        // u = e^0.2, d = e^-0.2, p = (1 - d)/(u - d), value = (1 - p)(100 - 100 d)
        let u = 0.2f64.exp();
        let d = 1.0 / u;
        let p = (1.0 - d) / (u - d);
        let expected = (1.0 - p) * (100.0 - 100.0 * d);
        assert!((p - 0.450).abs() < 1e-3);
        assert!((expected - 9.966).abs() < 0.01);
        let v = binomial_put(&BsSetup { s0: 100.0, strike: 100.0, maturity: 1.0, rate: 0.0, sigma: 0.2, steps: 1 }).unwrap();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn expiry_limit_is_intrinsic() {
        let v = binomial_put(&BsSetup { maturity: 1e-9, steps: 1, ..BsSetup::benchmark() }).unwrap();
        assert!((v - 4.0).abs() < 1e-6);
    }

    #[test]
    fn coarse_grid_with_high_rate_rejected() {
        let bad = BsSetup { rate: 0.5, sigma: 0.05, steps: 1, ..BsSetup::benchmark() };
        assert!(binomial_put(&bad).is_err());
    }

    #[test]
    fn american_dominates_european_and_monotone() {
        let base = BsSetup { steps: 200, ..BsSetup::benchmark() };
        for &sigma in &[0.1, 0.2, 0.4] {
            for &strike in &[30.0, 36.0, 40.0, 44.0] {
                let s = BsSetup { sigma, strike, ..base };
                let am = binomial_put(&s).unwrap();
                assert!(am >= binomial_european_put(&s).unwrap() - 1e-12);
                assert!(binomial_put(&BsSetup { strike: strike + 1.0, ..s }).unwrap() > am);
                // deep in the money both can sit at intrinsic
                assert!(binomial_put(&BsSetup { sigma: sigma + 0.05, ..s }).unwrap() >= am);
            }
        }
    }

    #[test]
    fn refinement_differences_shrink() {
        let price = |n| binomial_put(&BsSetup { steps: n, ..BsSetup::benchmark() }).unwrap();
        let d1 = (price(250) - price(125)).abs();
        let d2 = (price(500) - price(250)).abs();
        assert!(d2 < d1, "{d1} {d2}");
    }
}
