use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use super::nelder_mead::nelder_mead;
use super::{CalibrationReport, CirParams, EvaluatedPoint, OptimizerConfig, ParamBox, SkippedStage, StageRecord};
use crate::engine::{simulate_from_draws, BaseDraws, BccParams, GridSpec, SimulationHooks, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::lsm::{price_american_put, PricingOptions, PutContract};
use crate::market_data::{maturity_bucket, MaturityBucket, OptionQuote};
use crate::regressors::RegressorSpec;

const SV: [usize; 5] = [0, 1, 2, 3, 4];
const JUMPS: [usize; 3] = [5, 6, 7];
const EQUITY: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

/// Mean squared LSM pricing error over a set of quotes.
///
/// Quotes sharing a maturity and spot are priced on one simulated grid. Every
/// grid uses the same seed and path count, so the objective is a
/// deterministic function of the parameters. The parameter-free random draws
/// of each grid are generated once and reused.
pub struct ChainObjective<'a> {
    quotes: &'a [OptionQuote],
    groups: Vec<Group>,
    spec: &'a RegressorSpec,
    options: PricingOptions,
}

struct Group {
    members: Vec<usize>,
    draws: BaseDraws,
}

impl<'a> ChainObjective<'a> {
    /// `mc.s0` and `mc.horizon` are replaced per group.
    pub fn new(quotes: &'a [OptionQuote], spec: &'a RegressorSpec, mc: GridSpec, options: PricingOptions) -> Result<Self> {
        if quotes.is_empty() {
            return Err(Error::EmptyInput("option quotes"));
        }
        for q in quotes {
            q.validate()?;
        }
        spec.validate()?;
        let mut keys: Vec<(f64, f64, Vec<usize>)> = Vec::new();
        for (i, q) in quotes.iter().enumerate() {
            match keys.iter_mut().find(|g| g.0 == q.maturity_years && g.1 == q.spot) {
                Some(g) => g.2.push(i),
                None => keys.push((q.maturity_years, q.spot, vec![i])),
            }
        }
        let groups = keys
            .into_iter()
            .map(|(maturity, spot, members)| {
                let draws = BaseDraws::new(&GridSpec { s0: spot, horizon: maturity, ..mc })?;
                Ok(Group { members, draws })
            })
            .collect::<Result<_>>()?;
        Ok(ChainObjective { quotes, groups, spec, options })
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    /// Model price of every quote, in input order.
    pub fn prices(&self, params: &BccParams) -> Result<Vec<f64>> {
        params.validate()?;
        let per_group: Vec<Vec<(usize, f64)>> = self
            .groups
            .par_iter()
            .map(|group| {
                let draws = group.draws.finish(params.rho, params.lambda)?;
                let grid = simulate_from_draws(params, group.draws.spec(), &draws, SimulationHooks::default())?;
                group
                    .members
                    .par_iter()
                    .map(|&i| {
                        let q = &self.quotes[i];
                        let contract = PutContract { strike: q.strike, maturity: q.maturity_years };
                        price_american_put(&grid, &contract, self.spec, &self.options).map(|r| (i, r.price))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut prices = vec![0.0; self.quotes.len()];
        for (i, p) in per_group.into_iter().flatten() {
            prices[i] = p;
        }
        Ok(prices)
    }

    /// Mean squared error; infinite when the parameters are invalid.
    pub fn evaluate(&self, params: &BccParams) -> f64 {
        match self.prices(params) {
            Ok(prices) => {
                let sse: f64 = prices.iter().zip(self.quotes).map(|(p, q)| (p - q.mid_price).powi(2)).sum();
                sse / self.quotes.len() as f64
            }
            Err(_) => f64::INFINITY,
        }
    }
}

/// Objective values already computed in a stage, keyed by parameter bits.
struct Memo {
    stage: u8,
    seen: HashMap<[u64; 12], f64>,
}

impl Memo {
    fn record(&mut self, params: BccParams, value: f64, log: &mut Vec<EvaluatedPoint>) {
        if self.seen.insert(params.to_array().map(f64::to_bits), value).is_none() {
            log.push(EvaluatedPoint { stage: self.stage, params, objective: value });
        }
    }

    fn eval(&mut self, objective: &ChainObjective<'_>, params: BccParams, log: &mut Vec<EvaluatedPoint>) -> f64 {
        if let Some(&v) = self.seen.get(&params.to_array().map(f64::to_bits)) {
            return v;
        }
        let value = objective.evaluate(&params);
        self.record(params, value, log);
        value
    }
}

/// Runs one stage: optional grid search over `config.grid`, then restarted
/// Nelder-Mead in bound-normalized coordinates over the `free` parameters.
struct Stage<'o, 'a> {
    number: u8,
    objective: &'o ChainObjective<'a>,
    free: &'static [usize],
    grid_search: bool,
}

impl Stage<'_, '_> {
    fn run(&self, base: BccParams, config: &OptimizerConfig, log: &mut Vec<EvaluatedPoint>) -> Result<StageRecord> {
        let started = Instant::now();
        let names: Vec<&str> = self.free.iter().map(|&i| PARAM_NAMES[i]).collect();
        let bounds = ParamBox::new(config, &names)?;
        let mut base_arr = base.to_array();
        let clamped = bounds.clamp(&self.free.iter().map(|&i| base_arr[i]).collect::<Vec<_>>());
        for (&i, v) in self.free.iter().zip(&clamped) {
            base_arr[i] = *v;
        }
        let params_in = BccParams::from_array(base_arr);
        let with = |x: &[f64]| {
            let mut a = base_arr;
            for (&i, v) in self.free.iter().zip(x) {
                a[i] = *v;
            }
            BccParams::from_array(a)
        };

        let mut memo = Memo { stage: self.number, seen: HashMap::new() };
        let objective_in = memo.eval(self.objective, params_in, log);
        if !objective_in.is_finite() {
            return Err(Error::NonFinite("calibration objective at the stage start"));
        }

        let mut best_x = clamped.clone();
        let mut best = objective_in;
        if self.grid_search {
            let candidates = grid_points(config, &names, &clamped, &bounds);
            let values: Vec<f64> = candidates.par_iter().map(|x| self.objective.evaluate(&with(x))).collect();
            for (x, value) in candidates.into_iter().zip(values) {
                memo.record(with(&x), value, log);
                if value < best {
                    best = value;
                    best_x = x;
                }
            }
        }

        if config.max_evaluations > 0 {
            let unit = vec![(0.0, 1.0); self.free.len()];
            for _ in 0..=config.restarts {
                let u = bounds.normalize(&best_x);
                let m = nelder_mead(|u| memo.eval(self.objective, with(&bounds.denormalize(u)), log), &u, config, Some(&unit))?;
                let improved = best - m.min_value;
                if m.min_value < best {
                    best = m.min_value;
                    best_x = bounds.denormalize(&m.argmin);
                }
                if !(improved > config.tolerance) {
                    break;
                }
            }
        }
        let params_out = with(&best_x);
        Ok(StageRecord {
            stage: self.number,
            params_in,
            params_out,
            objective_in,
            objective_out: best,
            evaluations: memo.seen.len(),
            wall_time: started.elapsed().as_secs_f64(),
        })
    }
}

/// Cartesian product of the configured grid values, clamped into bounds.
/// Parameters without a grid keep their start value.
fn grid_points(config: &OptimizerConfig, names: &[&str], start: &[f64], bounds: &ParamBox) -> Vec<Vec<f64>> {
    if !names.iter().any(|n| config.grid.get(*n).is_some_and(|v| !v.is_empty())) {
        return Vec::new();
    }
    let mut points = vec![Vec::with_capacity(names.len())];
    for (k, name) in names.iter().enumerate() {
        let values = match config.grid.get(*name) {
            Some(v) if !v.is_empty() => v.clone(),
            _ => vec![start[k]],
        };
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points.into_iter().map(|p| bounds.clamp(&p)).collect()
}

fn is_short(q: &OptionQuote) -> bool {
    matches!(maturity_bucket(q.maturity_years), Ok(MaturityBucket::Short))
}

/// Default equity start point: `kappa_v 5`, `theta_v 0.02`, `sigma_v 0.5`,
/// `rho -0.7`, `v0 0.01`, `lambda 0.1`, `mu_j -0.2`, `delta 0.1`.
pub fn default_start(cir: &CirParams) -> BccParams {
    cir.apply(&BccParams {
        kappa_v: 5.0,
        theta_v: 0.02,
        sigma_v: 0.5,
        rho: -0.7,
        v0: 0.01,
        lambda: 0.1,
        mu_j: -0.2,
        delta: 0.1,
        kappa_r: 0.0,
        theta_r: 0.0,
        sigma_r: 0.0,
        r0: 0.0,
    })
}

/// Stages 2 to 4 from [`default_start`] with default pricing options.
pub fn calibrate_bcc(
    quotes: &[OptionQuote],
    cir: &CirParams,
    spec: &RegressorSpec,
    mc: &GridSpec,
    config: &OptimizerConfig,
) -> Result<CalibrationReport> {
    calibrate_bcc_from(quotes, cir, spec, mc, config, &default_start(cir), &PricingOptions::default())
}

/// Stages 2 to 4 of the calibration with the short-rate block fixed at `cir`.
///
/// Stage 2 fits the stochastic-volatility parameters with jumps switched off,
/// stage 3 the jump parameters on the short-maturity quotes, and stage 4 all
/// eight equity parameters on the full chain. Stage 4 starts from whichever
/// of the stage 3 point and the jump-free stage 2 point prices the chain
/// better. Only the equity part of `start` is used.
pub fn calibrate_bcc_from(
    quotes: &[OptionQuote],
    cir: &CirParams,
    spec: &RegressorSpec,
    mc: &GridSpec,
    config: &OptimizerConfig,
    start: &BccParams,
    options: &PricingOptions,
) -> Result<CalibrationReport> {
    cir.validate()?;
    config.validate()?;
    let full = ChainObjective::new(quotes, spec, *mc, *options)?;
    let mut log = Vec::new();
    let mut stages = Vec::new();
    let mut skipped = Vec::new();

    let start = cir.apply(start);
    let no_jumps = BccParams { lambda: 0.0, mu_j: 0.0, delta: 0.0, ..start };
    let s2 = Stage { number: 2, objective: &full, free: &SV, grid_search: true }.run(no_jumps, config, &mut log)?;
    let after_sv = s2.params_out;
    stages.push(s2);

    let with_start_jumps = BccParams { lambda: start.lambda, mu_j: start.mu_j, delta: start.delta, ..after_sv };
    let short: Vec<OptionQuote> = quotes.iter().filter(|q| is_short(q)).cloned().collect();
    let after_jumps = if short.is_empty() {
        skipped.push(SkippedStage { stage: 3, reason: "no short-maturity quotes".into() });
        with_start_jumps
    } else {
        let sub = ChainObjective::new(&short, spec, *mc, *options)?;
        let s3 = Stage { number: 3, objective: &sub, free: &JUMPS, grid_search: true }.run(with_start_jumps, config, &mut log)?;
        let p = s3.params_out;
        stages.push(s3);
        p
    };

    // jump-free alternative, nudged into the jump bounds
    let jump_box = ParamBox::new(config, &["lambda", "mu_j", "delta"])?;
    let j = jump_box.clamp(&[0.0, 0.0, 0.0]);
    let alt = BccParams { lambda: j[0], mu_j: j[1], delta: j[2], ..after_sv };
    let from_jumps = full.evaluate(&after_jumps);
    let from_alt = full.evaluate(&alt);
    log.push(EvaluatedPoint { stage: 4, params: after_jumps, objective: from_jumps });
    log.push(EvaluatedPoint { stage: 4, params: alt, objective: from_alt });
    let s4_start = if from_alt < from_jumps { alt } else { after_jumps };
    let s4 = Stage { number: 4, objective: &full, free: &EQUITY, grid_search: false }.run(s4_start, config, &mut log)?;
    let final_params = s4.params_out;
    stages.push(s4);

    Ok(CalibrationReport { stages, final_params, skipped, evaluation_log: log })
}

/// Copies of `template` with every mid replaced by the model price under
/// `params` on the same grids the calibration objective uses.
pub fn synthetic_chain(
    params: &BccParams,
    template: &[OptionQuote],
    spec: &RegressorSpec,
    mc: &GridSpec,
    options: &PricingOptions,
) -> Result<Vec<OptionQuote>> {
    let prices = ChainObjective::new(template, spec, *mc, *options)?.prices(params)?;
    Ok(template
        .iter()
        .zip(prices)
        .map(|(q, p)| OptionQuote { mid_price: p, ..q.clone() })
        .collect())
}
