use serde::{Deserialize, Serialize};

use super::nelder_mead::nelder_mead;
use super::{OptimizerConfig, ParamBox};
use crate::engine::BccParams;
use crate::error::{Error, Result};
use crate::market_data::ZeroBondQuote;

/// CIR short-rate parameters `dr = kappa_r (theta_r - r) dt + sigma_r sqrt(r) dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirParams {
    pub kappa_r: f64,
    pub theta_r: f64,
    pub sigma_r: f64,
    pub r0: f64,
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.kappa_r, self.theta_r, self.sigma_r, self.r0];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("CIR parameters must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }

    pub fn of(params: &BccParams) -> Self {
        CirParams { kappa_r: params.kappa_r, theta_r: params.theta_r, sigma_r: params.sigma_r, r0: params.r0 }
    }

    /// `params` with its rate block replaced by `self`.
    pub fn apply(&self, params: &BccParams) -> BccParams {
        BccParams { kappa_r: self.kappa_r, theta_r: self.theta_r, sigma_r: self.sigma_r, r0: self.r0, ..*params }
    }
}

/// `ln(1 + u) / u`, continuous at 0.
fn log1p_ratio(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - 0.5 * u
    } else {
        u.ln_1p() / u
    }
}

/// Zero-coupon bond price `A(T) exp(-B(T) r0)`.
///
/// `ln A` is evaluated as `4 kappa theta / (gamma + kappa)` times a bracket
/// divided by `gamma - kappa = 2 sigma^2 / (gamma + kappa)`, so the
/// expression stays accurate as `sigma_r` goes to 0 and equals the
/// deterministic mean-reverting limit there.
pub fn cir_bond_price(params: &CirParams, maturity: f64) -> Result<f64> {
    params.validate()?;
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::invalid(format!("maturity must be positive, got {maturity}")));
    }
    let CirParams { kappa_r: k, theta_r: theta, sigma_r: s, r0 } = *params;
    let t = maturity;
    let gamma = (k * k + 2.0 * s * s).sqrt();
    if gamma == 0.0 {
        return Ok((-r0 * t).exp());
    }
    let em1 = (gamma * t).exp_m1();
    let b = 2.0 * em1 / ((gamma + k) * em1 + 2.0 * gamma);
    let sum = gamma + k;
    let eps = 2.0 * s * s / sum;
    let a = eps / sum;
    let decay = (-gamma * t).exp();
    let bracket_over_eps = log1p_ratio(a) / sum - 0.5 * t - log1p_ratio(a * decay) * decay / sum;
    let ln_a = 4.0 * k * theta / sum * bracket_over_eps;
    Ok((ln_a - b * r0).exp())
}

/// Result of the bond-curve fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirFit {
    pub params: CirParams,
    /// Sum of squared price errors at `start` and at `params`.
    pub objective_start: f64,
    pub objective: f64,
    pub start: CirParams,
    pub evaluations: usize,
}

/// `-ln(P) / T` of the shortest bond.
pub fn implied_short_rate(bonds: &[ZeroBondQuote]) -> Result<f64> {
    let shortest = bonds
        .iter()
        .min_by(|a, b| a.maturity_years.total_cmp(&b.maturity_years))
        .ok_or(Error::EmptyInput("bond quotes"))?;
    Ok(-shortest.price.ln() / shortest.maturity_years)
}

fn bond_sse(params: &CirParams, bonds: &[ZeroBondQuote]) -> f64 {
    bonds
        .iter()
        .map(|q| match cir_bond_price(params, q.maturity_years) {
            Ok(p) => (p - q.price).powi(2),
            Err(_) => f64::INFINITY,
        })
        .sum()
}

/// Least-squares fit of `(kappa_r, theta_r, sigma_r)` to zero-coupon prices
/// with `r0` held fixed.
///
/// The simplex starts from `kappa_r = 0.5`, `theta_r` the yield of the
/// longest bond and `sigma_r = 0.05`, each clamped into its bounds.
pub fn calibrate_cir(bonds: &[ZeroBondQuote], r0: f64, config: &OptimizerConfig) -> Result<CirFit> {
    if bonds.len() < 3 {
        return Err(Error::invalid(format!("CIR fit needs at least 3 bond quotes, got {}", bonds.len())));
    }
    for q in bonds {
        q.validate()?;
    }
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(Error::invalid(format!("r0 must be finite and >= 0, got {r0}")));
    }
    config.validate()?;
    let bounds = ParamBox::new(config, &["kappa_r", "theta_r", "sigma_r"])?;
    let longest = bonds
        .iter()
        .max_by(|a, b| a.maturity_years.total_cmp(&b.maturity_years))
        .expect("at least 3 bonds");
    let long_yield = -longest.price.ln() / longest.maturity_years;
    let start_raw = bounds.clamp(&[0.5, long_yield.max(0.0), 0.05]);
    let make = |x: &[f64]| CirParams { kappa_r: x[0], theta_r: x[1], sigma_r: x[2], r0 };
    let start = make(&start_raw);

    let mut evaluations = 0;
    let mut u = bounds.normalize(&start_raw);
    let mut best = f64::INFINITY;
    let objective_start = bond_sse(&start, bonds);
    for _ in 0..=config.restarts {
        let m = nelder_mead(
            |u| {
                evaluations += 1;
                bond_sse(&make(&bounds.denormalize(u)), bonds)
            },
            &u,
            config,
            Some(&[(0.0, 1.0); 3]),
        )?;
        let improved = best - m.min_value;
        u = m.argmin;
        best = m.min_value;
        if !(improved > config.tolerance) {
            break;
        }
    }
    let (params, objective) = if objective_start <= best {
        (start, objective_start)
    } else {
        (make(&bounds.denormalize(&u)), best)
    };
    Ok(CirFit { params, objective_start, objective, start, evaluations: evaluations + 1 })
}
