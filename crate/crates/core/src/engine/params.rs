use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: Heston variance, Merton log-normal jumps and a CIR
/// short rate.
///
/// `mu_j` is the location of the log jump factor: a jump multiplies the
/// index by `exp(mu_j + delta * z)`, `z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BccParams {
    pub kappa_v: f64,
    pub theta_v: f64,
    pub sigma_v: f64,
    pub rho: f64,
    pub v0: f64,
    pub lambda: f64,
    pub mu_j: f64,
    pub delta: f64,
    pub kappa_r: f64,
    pub theta_r: f64,
    pub sigma_r: f64,
    pub r0: f64,
}

/// Parameter names in serialization order.
pub const PARAM_NAMES: [&str; 12] = [
    "kappa_v", "theta_v", "sigma_v", "rho", "v0", "lambda", "mu_j", "delta", "kappa_r", "theta_r",
    "sigma_r", "r0",
];

impl BccParams {
    /// Calibrated LSM row of the SPY study, with its CIR fit and `r0`
    /// defaulting to the long-run rate.
    pub fn spy_lsm() -> Self {
        BccParams {
            kappa_v: 20.850,
            theta_v: 0.012,
            sigma_v: 0.712,
            rho: -0.984,
            v0: 0.002,
            lambda: 0.0001,
            mu_j: -0.378,
            delta: 0.0005,
            kappa_r: 0.123,
            theta_r: 0.066,
            sigma_r: 0.001,
            r0: 0.066,
        }
    }

    pub fn spy_gbm() -> Self {
        BccParams {
            kappa_v: 22.568,
            theta_v: 0.011,
            sigma_v: 0.718,
            rho: -0.997,
            v0: 0.001,
            lambda: 0.0001,
            mu_j: -0.361,
            delta: 0.0004,
            ..Self::spy_lsm()
        }
    }

    pub fn spy_ann() -> Self {
        BccParams {
            kappa_v: 15.141,
            theta_v: 0.012,
            sigma_v: 0.481,
            rho: -0.967,
            v0: 0.003,
            lambda: 0.0001,
            mu_j: -0.377,
            delta: 0.0004,
            ..Self::spy_lsm()
        }
    }

    /// Constant volatility `sigma` and constant rate `rate`, no jumps: the
    /// simulator then reduces to exact geometric Brownian motion.
    pub fn black_scholes(sigma: f64, rate: f64) -> Self {
        BccParams {
            kappa_v: 1.0,
            theta_v: sigma * sigma,
            sigma_v: 0.0,
            rho: 0.0,
            v0: sigma * sigma,
            lambda: 0.0,
            mu_j: 0.0,
            delta: 0.0,
            kappa_r: 1.0,
            theta_r: rate,
            sigma_r: 0.0,
            r0: rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        let non_negative = [
            ("kappa_v", self.kappa_v),
            ("theta_v", self.theta_v),
            ("sigma_v", self.sigma_v),
            ("v0", self.v0),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("kappa_r", self.kappa_r),
            ("theta_r", self.theta_r),
            ("sigma_r", self.sigma_r),
            ("r0", self.r0),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::invalid(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if self.mu_j <= -1.0 {
            return Err(Error::invalid(format!("mu_j must exceed -1, got {}", self.mu_j)));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.kappa_v,
            self.theta_v,
            self.sigma_v,
            self.rho,
            self.v0,
            self.lambda,
            self.mu_j,
            self.delta,
            self.kappa_r,
            self.theta_r,
            self.sigma_r,
            self.r0,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        BccParams {
            kappa_v: a[0],
            theta_v: a[1],
            sigma_v: a[2],
            rho: a[3],
            v0: a[4],
            lambda: a[5],
            mu_j: a[6],
            delta: a[7],
            kappa_r: a[8],
            theta_r: a[9],
            sigma_r: a[10],
            r0: a[11],
        }
    }

    /// Jump drift correction `lambda * (E[exp(mu_j + delta z)] - 1)`.
    pub fn jump_compensator(&self) -> f64 {
        self.lambda * ((self.mu_j + 0.5 * self.delta * self.delta).exp() - 1.0)
    }
}

fn default_true() -> bool {
    true
}

/// Simulation grid: horizon, step count, path count and draw options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub s0: f64,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub antithetic: bool,
    #[serde(default = "default_true")]
    pub moment_match: bool,
}

impl GridSpec {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps < 1 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if self.paths < 2 {
            return Err(Error::invalid(format!("paths must be >= 2, got {}", self.paths)));
        }
        if self.antithetic && self.paths % 2 != 0 {
            return Err(Error::invalid(format!(
                "antithetic sampling needs an even path count, got {}",
                self.paths
            )));
        }
        Ok(())
    }
}
