use std::io::Write;

use nalgebra::DMatrix;

use super::{generate_draws, BccParams, DrawBlock, GridSpec};
use crate::error::{Error, Result};
use crate::stats::mean_and_se;

/// Simulated paths on a uniform grid. Every matrix is `paths x (steps + 1)`;
/// column `t` holds all paths at time `t * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub index: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub rate: DMatrix<f64>,
    /// Cumulative pathwise discount factor `B_0(t)`.
    pub discount: DMatrix<f64>,
    pub dt: f64,
    pub s0: f64,
    /// Rows come in antithetic pairs `(2k, 2k + 1)`.
    pub antithetic: bool,
}

impl PathGrid {
    pub fn paths(&self) -> usize {
        self.index.nrows()
    }

    pub fn steps(&self) -> usize {
        self.index.ncols() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    /// Per-path `B_0(T) * S_T`.
    pub fn discounted_terminal(&self) -> Vec<f64> {
        let m = self.steps();
        self.discount
            .column(m)
            .iter()
            .zip(self.index.column(m).iter())
            .map(|(b, s)| b * s)
            .collect()
    }

    /// Debug dump with header `path,step,index,variance,rate,discount`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path,step,index,variance,rate,discount")?;
        for i in 0..self.paths() {
            for t in 0..=self.steps() {
                writeln!(
                    out,
                    "{i},{t},{},{},{},{}",
                    self.index[(i, t)],
                    self.variance[(i, t)],
                    self.rate[(i, t)],
                    self.discount[(i, t)]
                )?;
            }
        }
        Ok(())
    }
}

/// Switches for deliberately broken dynamics, used to show that the checks
/// built on the simulator can detect a wrong drift.
#[doc(hidden)]
#[derive(Debug, Clone, Copy)]
pub struct SimulationHooks {
    pub jump_compensator: bool,
}

impl Default for SimulationHooks {
    fn default() -> Self {
        SimulationHooks { jump_compensator: true }
    }
}

/// Simulate index, variance and short-rate paths.
///
/// Per step `s -> t` with `dt`:
///
/// ```text
/// v~_t = v~_s + kappa_v (theta_v - v_s) dt + sigma_v sqrt(v_s dt) z2,   v_t = max(v~_t, 0)
/// r~_t = r~_s + kappa_r (theta_r - r_s) dt + sigma_r sqrt(r_s dt) z3,   r_t = max(r~_t, 0)
/// rbar = (r_s + r_t) / 2
/// m    = exp((rbar - r_f - v_s / 2) dt + sqrt(v_s dt) z1) + (exp(mu_j + delta z4) - 1) y
/// S_t  = S_s * max(m, 0),   B_t = B_s * exp(-rbar dt)
/// ```
///
/// where `v_s`, `r_s` are the truncated start-of-step values and
/// `r_f = lambda (exp(mu_j + delta^2 / 2) - 1)`. The index diffusion uses the
/// start-of-step variance so that `exp(sqrt(v_s dt) z1 - v_s dt / 2)` has unit
/// conditional mean even though `z1` and `z2` are correlated.
pub fn simulate(params: &BccParams, spec: &GridSpec) -> Result<PathGrid> {
    simulate_with_hooks(params, spec, SimulationHooks::default())
}

#[doc(hidden)]
pub fn simulate_with_hooks(params: &BccParams, spec: &GridSpec, hooks: SimulationHooks) -> Result<PathGrid> {
    params.validate()?;
    let draws = generate_draws(spec, params.rho, params.lambda)?;
    simulate_from_draws(params, spec, &draws, hooks)
}

#[doc(hidden)]
pub fn simulate_from_draws(
    params: &BccParams,
    spec: &GridSpec,
    draws: &DrawBlock,
    hooks: SimulationHooks,
) -> Result<PathGrid> {
    spec.validate()?;
    let (n, m) = (spec.paths, spec.steps);
    if draws.z1.shape() != (n, m) {
        return Err(Error::invalid(format!(
            "draw block is {:?}, grid needs {:?}",
            draws.z1.shape(),
            (n, m)
        )));
    }
    let dt = spec.dt();
    let sdt = dt.sqrt();
    let r_f = if hooks.jump_compensator { params.jump_compensator() } else { 0.0 };

    let mut index = DMatrix::zeros(n, m + 1);
    let mut variance = DMatrix::zeros(n, m + 1);
    let mut rate = DMatrix::zeros(n, m + 1);
    let mut discount = DMatrix::zeros(n, m + 1);

    // untruncated auxiliary states
    let mut v_aux = vec![params.v0; n];
    let mut r_aux = vec![params.r0; n];
    for i in 0..n {
        index[(i, 0)] = spec.s0;
        variance[(i, 0)] = params.v0.max(0.0);
        rate[(i, 0)] = params.r0.max(0.0);
        discount[(i, 0)] = 1.0;
    }

    for t in 1..=m {
        let s = t - 1;
        for i in 0..n {
            let v_s = v_aux[i].max(0.0);
            let r_s = r_aux[i].max(0.0);
            v_aux[i] += params.kappa_v * (params.theta_v - v_s) * dt
                + params.sigma_v * v_s.sqrt() * sdt * draws.z2[(i, s)];
            r_aux[i] += params.kappa_r * (params.theta_r - r_s) * dt
                + params.sigma_r * r_s.sqrt() * sdt * draws.z3[(i, s)];
            let v_t = v_aux[i].max(0.0);
            let r_t = r_aux[i].max(0.0);
            let r_bar = 0.5 * (r_s + r_t);

            let diffusion = ((r_bar - r_f - 0.5 * v_s) * dt + v_s.sqrt() * sdt * draws.z1[(i, s)]).exp();
            let y = draws.jumps[(i, s)];
            let jump = if y > 0 {
                ((params.mu_j + params.delta * draws.z4[(i, s)]).exp() - 1.0) * f64::from(y)
            } else {
                0.0
            };
            index[(i, t)] = index[(i, s)] * (diffusion + jump).max(0.0);
            variance[(i, t)] = v_t;
            rate[(i, t)] = r_t;
            discount[(i, t)] = discount[(i, s)] * (-r_bar * dt).exp();
        }
    }

    Ok(PathGrid {
        index,
        variance,
        rate,
        discount,
        dt,
        s0: spec.s0,
        antithetic: spec.antithetic,
    })
}

/// Sample mean and standard error of `B_0(T) * S_T`; a martingale check
/// against `s0`. Antithetic grids are assessed on pair averages.
pub fn martingale_diagnostic(grid: &PathGrid) -> (f64, f64) {
    mean_and_se(&grid.discounted_terminal(), grid.antithetic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(paths: usize) -> GridSpec {
        GridSpec { s0: 100.0, horizon: 1.0, steps: 20, paths, seed: 11, antithetic: true, moment_match: true }
    }

    #[test]
    fn initial_column_and_shapes() {
        let p = BccParams::spy_lsm();
        let g = simulate(&p, &spec(200)).unwrap();
        assert_eq!(g.index.shape(), (200, 21));
        for i in 0..200 {
            assert_eq!(g.index[(i, 0)], 100.0);
            assert_eq!(g.variance[(i, 0)], p.v0);
            assert_eq!(g.rate[(i, 0)], p.r0);
            assert_eq!(g.discount[(i, 0)], 1.0);
        }
    }

    #[test]
    fn zero_noise_fixed_point() {
        let p = BccParams {
            sigma_v: 0.0,
            sigma_r: 0.0,
            lambda: 0.0,
            v0: 0.05,
            theta_v: 0.05,
            r0: 0.03,
            theta_r: 0.03,
            ..BccParams::spy_lsm()
        };
        let g = simulate(&p, &spec(100)).unwrap();
        assert!(g.variance.iter().all(|&v| (v - 0.05).abs() < 1e-15));
        assert!(g.rate.iter().all(|&r| (r - 0.03).abs() < 1e-15));
    }

    #[test]
    fn truncation_and_monotone_discount() {
        // heavily Feller-violating variance and rate
        let p = BccParams {
            kappa_v: 0.5,
            theta_v: 0.01,
            sigma_v: 2.0,
            v0: 0.01,
            kappa_r: 0.1,
            theta_r: 0.01,
            sigma_r: 0.5,
            r0: 0.01,
            ..BccParams::spy_lsm()
        };
        let g = simulate(&p, &spec(500)).unwrap();
        assert!(g.variance.iter().all(|&v| v >= 0.0));
        assert!(g.rate.iter().all(|&r| r >= 0.0));
        assert!(g.variance.iter().any(|&v| v == 0.0), "test should exercise truncation");
        for i in 0..g.paths() {
            for t in 1..=g.steps() {
                assert!(g.discount[(i, t)] > 0.0);
                assert!(g.discount[(i, t)] <= g.discount[(i, t - 1)]);
            }
        }
    }

    #[test]
    fn deterministic_path_diagnostic() {
        let p = BccParams { v0: 0.0, theta_v: 0.0, sigma_v: 0.0, lambda: 0.0, r0: 0.0, theta_r: 0.0, sigma_r: 0.0, ..BccParams::spy_lsm() };
        let s = GridSpec { paths: 2, antithetic: false, moment_match: false, ..spec(2) };
        let g = simulate(&p, &s).unwrap();
        let (est, se) = martingale_diagnostic(&g);
        assert_eq!(est, 100.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn csv_dump_header() {
        let g = simulate(&BccParams::spy_lsm(), &GridSpec { steps: 2, ..spec(2) }).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "path,step,index,variance,rate,discount");
        assert_eq!(text.lines().count(), 1 + 2 * 3);
    }
}
