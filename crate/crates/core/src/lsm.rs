//! Least-squares Monte Carlo (Longstaff-Schwartz) for American puts on a
//! simulated [`PathGrid`].
//!
//! Cashflows are discounted pathwise with the grid's stochastic discount
//! factors. Exercise at time zero is handled by flooring the estimate at the
//! immediate payoff rather than by a regression at step 0.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::PathGrid;
use crate::error::{Error, Result};
use crate::regressors::{fit, predict, RegressorSpec};
use crate::stats::mean_and_se;

pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutContract {
    pub strike: f64,
    pub maturity: f64,
}

impl PutContract {
    pub fn payoff(&self, s: f64) -> f64 {
        (self.strike - s).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::invalid(format!("maturity must be positive, got {}", self.maturity)));
        }
        Ok(())
    }
}

/// State variables fed to the continuation regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// `S / K`.
    #[default]
    PriceOnly,
    /// `S / K`, variance and short rate.
    FullState,
}

impl FeatureSet {
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            FeatureSet::PriceOnly => &["moneyness"],
            FeatureSet::FullState => &["moneyness", "variance", "rate"],
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingOptions {
    /// Regress on in-the-money paths only.
    #[serde(default = "default_true")]
    pub itm_only: bool,
    #[serde(default)]
    pub features: FeatureSet,
    /// Use the discounted terminal index (mean `s0`) as a control variate.
    #[serde(default)]
    pub control_variate: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions { itm_only: true, features: FeatureSet::PriceOnly, control_variate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingResult {
    pub price: f64,
    pub std_error: f64,
    /// Fraction of paths whose exercise happens at each step `0..=steps`.
    pub exercise_fraction: Vec<f64>,
    /// Seconds spent in the backward induction.
    pub wall_time: f64,
    pub regressor: RegressorSpec,
}

/// How continuation values are obtained. `PerfectForesight` uses the realized
/// discounted cashflow of each path, which looks into the future and
/// overprices the option.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationMode {
    Regression,
    PerfectForesight,
}

/// Regression inputs and output at one exercise date.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRow {
    pub index: f64,
    pub features: Vec<f64>,
    pub target: f64,
    pub fitted: f64,
}

struct Induction {
    /// Per-path cashflow discounted to time zero.
    discounted: Vec<f64>,
    exercise_step: Vec<usize>,
    exercised: Vec<bool>,
    surface: Vec<SurfaceRow>,
}

fn features_at(grid: &PathGrid, contract: &PutContract, set: FeatureSet, t: usize, rows: &[usize]) -> DMatrix<f64> {
    let k = contract.strike;
    match set {
        FeatureSet::PriceOnly => DMatrix::from_fn(rows.len(), 1, |r, _| grid.index[(rows[r], t)] / k),
        FeatureSet::FullState => DMatrix::from_fn(rows.len(), 3, |r, j| {
            let i = rows[r];
            match j {
                0 => grid.index[(i, t)] / k,
                1 => grid.variance[(i, t)],
                _ => grid.rate[(i, t)],
            }
        }),
    }
}

fn check_inputs(grid: &PathGrid, contract: &PutContract) -> Result<()> {
    contract.validate()?;
    if grid.paths() < MIN_PATHS {
        return Err(Error::invalid(format!(
            "least-squares Monte Carlo needs at least {MIN_PATHS} paths, got {}",
            grid.paths()
        )));
    }
    let horizon = grid.horizon();
    if (horizon - contract.maturity).abs() > 1e-9 * contract.maturity.max(1.0) {
        return Err(Error::invalid(format!(
            "grid horizon {horizon} does not match contract maturity {}",
            contract.maturity
        )));
    }
    Ok(())
}

fn induction(
    grid: &PathGrid,
    contract: &PutContract,
    spec: &RegressorSpec,
    options: &PricingOptions,
    mode: ContinuationMode,
    capture: Option<usize>,
) -> Result<Induction> {
    let n = grid.paths();
    let m = grid.steps();
    let mut cash: Vec<f64> = (0..n).map(|i| contract.payoff(grid.index[(i, m)])).collect();
    let mut exercise_step = vec![m; n];
    let mut exercised: Vec<bool> = cash.iter().map(|&c| c > 0.0).collect();
    let mut surface = Vec::new();

    for t in (1..m).rev() {
        let intrinsic: Vec<f64> = (0..n).map(|i| contract.payoff(grid.index[(i, t)])).collect();
        let train: Vec<usize> = if options.itm_only {
            (0..n).filter(|&i| intrinsic[i] > 0.0).collect()
        } else {
            (0..n).collect()
        };
        if train.is_empty() {
            continue;
        }
        let targets: Vec<f64> = train
            .iter()
            .map(|&i| cash[i] * grid.discount[(i, exercise_step[i])] / grid.discount[(i, t)])
            .collect();
        let x = features_at(grid, contract, options.features, t, &train);
        let continuation = match mode {
            ContinuationMode::Regression => {
                let model = fit(spec, &x, &targets)?;
                predict(&model, &x)?
            }
            ContinuationMode::PerfectForesight => targets.clone(),
        };
        if capture == Some(t) {
            surface = train
                .iter()
                .enumerate()
                .map(|(r, &i)| SurfaceRow {
                    index: grid.index[(i, t)],
                    features: x.row(r).iter().cloned().collect(),
                    target: targets[r],
                    fitted: continuation[r],
                })
                .collect();
        }
        for (r, &i) in train.iter().enumerate() {
            if intrinsic[i] > 0.0 && intrinsic[i] >= continuation[r] {
                cash[i] = intrinsic[i];
                exercise_step[i] = t;
                exercised[i] = true;
            }
        }
    }

    let discounted = (0..n).map(|i| cash[i] * grid.discount[(i, exercise_step[i])]).collect();
    Ok(Induction { discounted, exercise_step, exercised, surface })
}

/// Price an American put by backward induction with the regressor `spec`.
pub fn price_american_put(
    grid: &PathGrid,
    contract: &PutContract,
    spec: &RegressorSpec,
    options: &PricingOptions,
) -> Result<PricingResult> {
    price_with_mode(grid, contract, spec, options, ContinuationMode::Regression)
}

#[doc(hidden)]
pub fn price_with_mode(
    grid: &PathGrid,
    contract: &PutContract,
    spec: &RegressorSpec,
    options: &PricingOptions,
    mode: ContinuationMode,
) -> Result<PricingResult> {
    check_inputs(grid, contract)?;
    spec.validate()?;
    let started = Instant::now();
    let run = induction(grid, contract, spec, options, mode, None)?;

    let mut values = run.discounted;
    if options.control_variate {
        let control: Vec<f64> = grid.discounted_terminal().into_iter().map(|v| v - grid.s0).collect();
        let beta = regression_slope(&values, &control);
        for (v, c) in values.iter_mut().zip(&control) {
            *v -= beta * c;
        }
    }
    let (mean, std_error) = mean_and_se(&values, grid.antithetic);

    let n = grid.paths() as f64;
    let mut exercise_fraction = vec![0.0; grid.steps() + 1];
    let immediate = contract.payoff(grid.s0);
    let price = if immediate > mean {
        exercise_fraction[0] = 1.0;
        immediate
    } else {
        for (step, done) in run.exercise_step.iter().zip(&run.exercised) {
            if *done {
                exercise_fraction[*step] += 1.0 / n;
            }
        }
        mean
    };
    Ok(PricingResult {
        price,
        std_error,
        exercise_fraction,
        wall_time: started.elapsed().as_secs_f64(),
        regressor: spec.clone(),
    })
}

/// `cov(y, x) / var(x)`, zero when `x` has no spread.
fn regression_slope(y: &[f64], x: &[f64]) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mx = x.iter().sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (a, b) in y.iter().zip(x) {
        cov += (a - my) * (b - mx);
        var += (b - mx) * (b - mx);
    }
    if var > 0.0 {
        cov / var
    } else {
        0.0
    }
}

/// Mean and standard error of the discounted terminal payoff (no early
/// exercise) on the same grid.
pub fn european_put(grid: &PathGrid, contract: &PutContract) -> Result<(f64, f64)> {
    contract.validate()?;
    let m = grid.steps();
    let values: Vec<f64> = (0..grid.paths())
        .map(|i| contract.payoff(grid.index[(i, m)]) * grid.discount[(i, m)])
        .collect();
    Ok(mean_and_se(&values, grid.antithetic))
}

/// Regression training pairs and fitted continuation values at `step`,
/// produced by the same backward induction as the pricer.
pub fn continuation_surface(
    grid: &PathGrid,
    contract: &PutContract,
    spec: &RegressorSpec,
    options: &PricingOptions,
    step: usize,
) -> Result<Vec<SurfaceRow>> {
    check_inputs(grid, contract)?;
    if step < 1 || step >= grid.steps() {
        return Err(Error::OutOfRange(format!(
            "surface step must lie in 1..={}, got {step}",
            grid.steps().saturating_sub(1)
        )));
    }
    Ok(induction(grid, contract, spec, options, ContinuationMode::Regression, Some(step))?.surface)
}

pub fn write_surface_csv<W: Write>(rows: &[SurfaceRow], features: FeatureSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,{},target,fitted", features.names().join(","))?;
    for r in rows {
        let feats: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{},{},{}", r.index, feats.join(","), r.target, r.fitted)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, BccParams, GridSpec};

    fn grid(params: &BccParams, s0: f64, paths: usize, steps: usize) -> PathGrid {
        let spec = GridSpec { s0, horizon: 1.0, steps, paths, seed: 5, antithetic: true, moment_match: true };
        simulate(params, &spec).unwrap()
    }

    fn contract(strike: f64) -> PutContract {
        PutContract { strike, maturity: 1.0 }
    }

    #[test]
    fn flat_zero_rate_path_is_intrinsic() {
        let p = BccParams { v0: 0.0, theta_v: 0.0, sigma_v: 0.0, lambda: 0.0, r0: 0.0, theta_r: 0.0, sigma_r: 0.0, ..BccParams::spy_lsm() };
        let g = grid(&p, 36.0, 200, 10);
        let r = price_american_put(&g, &contract(40.0), &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap();
        assert_eq!(r.price, 4.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn worthless_put() {
        let g = grid(&BccParams::black_scholes(0.2, 0.06), 1000.0, 1000, 10);
        let r = price_american_put(&g, &contract(1.0), &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap();
        assert_eq!(r.price, 0.0);
        assert!(r.exercise_fraction.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn preconditions() {
        let g = grid(&BccParams::black_scholes(0.2, 0.06), 36.0, 50, 10);
        let spec = RegressorSpec::polynomial();
        let opts = PricingOptions::default();
        assert!(price_american_put(&g, &contract(40.0), &spec, &opts).is_err());
        let g = grid(&BccParams::black_scholes(0.2, 0.06), 36.0, 200, 10);
        assert!(price_american_put(&g, &PutContract { strike: 40.0, maturity: 2.0 }, &spec, &opts).is_err());
        assert!(price_american_put(&g, &contract(0.0), &spec, &opts).is_err());
        assert!(continuation_surface(&g, &contract(40.0), &spec, &opts, 0).is_err());
        assert!(continuation_surface(&g, &contract(40.0), &spec, &opts, 10).is_err());
    }

    #[test]
    fn bracket_and_strike_monotonicity() {
        let g = grid(&BccParams::black_scholes(0.2, 0.06), 36.0, 4000, 20);
        let spec = RegressorSpec::polynomial();
        let opts = PricingOptions::default();
        let lo = price_american_put(&g, &contract(36.0), &spec, &opts).unwrap();
        let hi = price_american_put(&g, &contract(40.0), &spec, &opts).unwrap();
        assert!(hi.price >= lo.price);
        assert!(hi.price >= 4.0 && hi.price <= 40.0);
        let total: f64 = hi.exercise_fraction.iter().sum();
        assert!(total > 0.0 && total <= 1.0 + 1e-12);
    }

    #[test]
    fn surface_rows_match_training_set() {
        let g = grid(&BccParams::black_scholes(0.2, 0.06), 36.0, 1000, 10);
        let c = contract(40.0);
        let rows = continuation_surface(&g, &c, &RegressorSpec::polynomial(), &PricingOptions::default(), 5).unwrap();
        let itm = (0..g.paths()).filter(|&i| g.index[(i, 5)] < 40.0).count();
        assert_eq!(rows.len(), itm);
        assert!(rows.iter().all(|r| r.fitted.is_finite()));
        let mut buf = Vec::new();
        write_surface_csv(&rows, FeatureSet::PriceOnly, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("index,moneyness,target,fitted\n"));

        let all = PricingOptions { itm_only: false, features: FeatureSet::FullState, control_variate: false };
        let rows = continuation_surface(&g, &c, &RegressorSpec::polynomial(), &all, 5).unwrap();
        assert_eq!(rows.len(), g.paths());
        assert_eq!(rows[0].features.len(), 3);
    }
}
