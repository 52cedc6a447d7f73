//! Four-stage calibration: the CIR short rate to zero-coupon bonds, then the
//! stochastic-volatility block, the jump block on short maturities and a
//! joint refinement, all against LSM prices under common random numbers.

mod bcc;
mod cir;
mod nelder_mead;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use bcc::{calibrate_bcc, calibrate_bcc_from, default_start, synthetic_chain, ChainObjective};
pub use cir::{calibrate_cir, cir_bond_price, implied_short_rate, CirFit, CirParams};
pub use nelder_mead::{nelder_mead, Minimum};

use crate::engine::{BccParams, GridSpec, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::lsm::PricingOptions;
use crate::market_data::{OptionQuote, ZeroBondQuote};
use crate::regressors::RegressorSpec;

/// Nelder-Mead settings plus the per-parameter search grid and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Evaluations per simplex run after the start point.
    pub max_evaluations: usize,
    /// Stop once `f(worst) - f(best)` over the simplex is at most this.
    pub tolerance: f64,
    /// Initial edge length: a fraction of the bound width for bounded
    /// coordinates, otherwise of `max(|x|, 1)`.
    pub initial_step: f64,
    /// Extra simplex runs from the best point while they still improve.
    pub restarts: usize,
    pub grid: BTreeMap<String, Vec<f64>>,
    pub bounds: BTreeMap<String, [f64; 2]>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let bounds = [
            ("kappa_v", [0.5, 50.0]),
            ("theta_v", [1e-4, 0.25]),
            ("sigma_v", [0.01, 2.0]),
            ("rho", [-0.999, 0.0]),
            ("v0", [1e-5, 0.25]),
            ("lambda", [0.0, 1.0]),
            ("mu_j", [-0.9, 0.5]),
            ("delta", [1e-4, 0.5]),
            ("kappa_r", [0.0, 5.0]),
            ("theta_r", [0.0, 0.5]),
            ("sigma_r", [0.0, 0.5]),
        ];
        let grid = [
            ("kappa_v", vec![2.0, 10.0, 25.0]),
            ("theta_v", vec![0.01, 0.04]),
            ("sigma_v", vec![0.3, 0.8]),
            ("rho", vec![-0.9, -0.5]),
            ("v0", vec![0.003, 0.02]),
            ("lambda", vec![0.0, 0.2]),
            ("mu_j", vec![-0.3, 0.0]),
            ("delta", vec![0.05, 0.2]),
        ];
        OptimizerConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_evaluations: 1000,
            tolerance: 1e-14,
            initial_step: 0.1,
            restarts: 2,
            grid: grid.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            bounds: bounds.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl OptimizerConfig {
    /// Default bounds, no grid.
    pub fn without_grid() -> Self {
        OptimizerConfig { grid: BTreeMap::new(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("reflection", self.reflection), ("expansion", self.expansion)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("contraction", self.contraction), ("shrink", self.shrink), ("initial_step", self.initial_step)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be finite and >= 0, got {}", self.tolerance)));
        }
        let known = |name: &str| -> Result<()> {
            if PARAM_NAMES.contains(&name) {
                Ok(())
            } else {
                Err(Error::invalid(format!("unknown parameter {name:?}")))
            }
        };
        for (name, [lo, hi]) in &self.bounds {
            known(name)?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("bounds for {name} must be finite with lo < hi, got [{lo}, {hi}]")));
            }
        }
        for (name, values) in &self.grid {
            known(name)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("grid for {name} has a non-finite value")));
            }
        }
        Ok(())
    }
}

/// Bounds of a list of named parameters and the map onto `[0, 1]`. The map
/// is logarithmic for a parameter whose lower bound is positive, so small
/// values such as `v0` get the same resolution as large ones.
pub(crate) struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub(crate) fn new(config: &OptimizerConfig, names: &[&str]) -> Result<Self> {
        let mut lo = Vec::with_capacity(names.len());
        let mut hi = Vec::with_capacity(names.len());
        for name in names {
            let [l, h] = config
                .bounds
                .get(*name)
                .ok_or_else(|| Error::invalid(format!("no bounds configured for {name}")))?;
            lo.push(*l);
            hi.push(*h);
        }
        Ok(ParamBox { lo, hi })
    }

    pub(crate) fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| v.clamp(self.lo[i], self.hi[i])).collect()
    }

    pub(crate) fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                if lo > 0.0 {
                    (v / lo).ln() / (hi / lo).ln()
                } else {
                    (v - lo) / (hi - lo)
                }
            })
            .collect()
    }

    pub(crate) fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                let x = if lo > 0.0 { lo * ((hi / lo).ln() * v).exp() } else { lo + v * (hi - lo) };
                x.clamp(lo, hi)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: u8,
    pub params_in: BccParams,
    pub params_out: BccParams,
    pub objective_in: f64,
    pub objective_out: f64,
    pub evaluations: usize,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedStage {
    pub stage: u8,
    pub reason: String,
}

/// One objective evaluation, kept for auditing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluatedPoint {
    pub stage: u8,
    pub params: BccParams,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub stages: Vec<StageRecord>,
    #[serde(rename = "final")]
    pub final_params: BccParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedStage>,
    #[serde(skip)]
    pub evaluation_log: Vec<EvaluatedPoint>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn stage(&self, number: u8) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == number)
    }

    /// Objective of the last stage at its output point.
    pub fn final_objective(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.objective_out)
    }
}

/// Everything the equity stages need besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSetup {
    pub regressor: RegressorSpec,
    /// `s0` and `horizon` are taken from each quote.
    pub grid: GridSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub pricing: PricingOptions,
    /// Equity start point; the rate block is ignored.
    #[serde(default)]
    pub start: Option<BccParams>,
}

/// Full pipeline: CIR fit with `r0` implied by the shortest bond, then
/// [`calibrate_bcc_from`].
pub fn calibrate(quotes: &[OptionQuote], bonds: &[ZeroBondQuote], setup: &CalibrationSetup) -> Result<CalibrationReport> {
    let started = Instant::now();
    let r0 = implied_short_rate(bonds)?;
    let fit = calibrate_cir(bonds, r0, &setup.optimizer)?;
    let equity = setup.start.unwrap_or_else(|| default_start(&fit.start));
    let stage1 = StageRecord {
        stage: 1,
        params_in: fit.start.apply(&equity),
        params_out: fit.params.apply(&equity),
        objective_in: fit.objective_start,
        objective_out: fit.objective,
        evaluations: fit.evaluations,
        wall_time: started.elapsed().as_secs_f64(),
    };
    let mut report = calibrate_bcc_from(quotes, &fit.params, &setup.regressor, &setup.grid, &setup.optimizer, &equity, &setup.pricing)?;
    report.stages.insert(0, stage1);
    Ok(report)
}
