//! JSON run configuration shared by the CLI subcommands.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSetup, OptimizerConfig};
use crate::engine::{BccParams, GridSpec};
use crate::error::{Error, Result};
use crate::lsm::{PricingOptions, PutContract};
use crate::regressors::RegressorSpec;

fn default_regressor() -> RegressorSpec {
    RegressorSpec::polynomial()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: BccParams,
    pub grid: GridSpec,
    pub contract: PutContract,
    #[serde(default = "default_regressor")]
    pub regressor: RegressorSpec,
    #[serde(default)]
    pub pricing: PricingOptions,
    #[serde(default)]
    pub calibration: Option<CalibrationSection>,
}

/// Data files and optimizer settings for `calibrate` and `report`. Relative
/// paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Underlying level on the quote date.
    pub spot: f64,
    /// `YYYY-MM-DD`.
    pub quote_date: NaiveDate,
    #[serde(default)]
    pub chain: Option<PathBuf>,
    #[serde(default)]
    pub chain2: Option<PathBuf>,
    #[serde(default)]
    pub bonds: Option<PathBuf>,
    /// Paths, steps and seed for the pricing grids; `s0` and `horizon` come
    /// from each quote. Defaults to the top-level grid.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Equity start point for stage 2.
    #[serde(default)]
    pub start: Option<BccParams>,
}

impl RunConfig {
    /// The built-in American put benchmark: constant 20% volatility, 6% rate,
    /// `S0 = 36`, `K = 40`, one year, 20 exercise dates, 25,000 paths.
    pub fn benchmark() -> Self {
        RunConfig {
            model: BccParams::black_scholes(0.2, 0.06),
            grid: GridSpec { s0: 36.0, horizon: 1.0, steps: 20, paths: 25_000, seed: 1, antithetic: true, moment_match: true },
            contract: PutContract { strike: 40.0, maturity: 1.0 },
            regressor: RegressorSpec::polynomial(),
            pricing: PricingOptions::default(),
            calibration: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Read, parse and validate; relative data paths are made relative to
    /// the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(cal) = config.calibration.as_mut() {
            for p in [&mut cal.chain, &mut cal.chain2, &mut cal.bonds].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.grid.validate()?;
        self.contract.validate()?;
        self.regressor.validate()?;
        if (self.grid.horizon - self.contract.maturity).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "grid horizon {} differs from contract maturity {}",
                self.grid.horizon, self.contract.maturity
            )));
        }
        if let Some(cal) = &self.calibration {
            if !(cal.spot > 0.0 && cal.spot.is_finite()) {
                return Err(Error::invalid(format!("calibration spot must be positive, got {}", cal.spot)));
            }
            if let Some(g) = &cal.grid {
                g.validate()?;
            }
            if let Some(start) = &cal.start {
                start.validate()?;
            }
            cal.optimizer.validate()?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.grid.seed = seed;
            if let Some(g) = self.calibration.as_mut().and_then(|c| c.grid.as_mut()) {
                g.seed = seed;
            }
        }
        self
    }

    /// Settings for the equity stages of the calibration.
    pub fn calibration_setup(&self) -> Result<CalibrationSetup> {
        let cal = self
            .calibration
            .as_ref()
            .ok_or_else(|| Error::invalid("config has no calibration section"))?;
        Ok(CalibrationSetup {
            regressor: self.regressor.clone(),
            grid: cal.grid.unwrap_or(self.grid),
            optimizer: cal.optimizer.clone(),
            pricing: self.pricing,
            start: cal.start,
        })
    }
}
