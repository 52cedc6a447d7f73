use std::collections::BTreeMap;

use bcc_lsm::calibration::{calibrate_bcc, default_start, synthetic_chain, ChainObjective, CirParams};
use bcc_lsm::engine::PARAM_NAMES;
use bcc_lsm::{BccParams, GridSpec, OptimizerConfig, OptionQuote, PricingOptions, RegressorSpec};
use chrono::{Duration, NaiveDate};

const SPOT: f64 = 100.0;

fn cir() -> CirParams {
    CirParams { kappa_r: 0.123, theta_r: 0.066, sigma_r: 0.001, r0: 0.03 }
}

fn mc() -> GridSpec {
    GridSpec { s0: SPOT, horizon: 0.1, steps: 6, paths: 1000, seed: 21, antithetic: true, moment_match: true }
}

fn chain(days: &[i64]) -> Vec<OptionQuote> {
    let date = NaiveDate::from_ymd_opt(2020, 3, 2).unwrap();
    let mut template = Vec::new();
    for &d in days {
        for k in [97.0, 100.0, 103.0] {
            template.push(OptionQuote::new(date, date + Duration::days(d), k, 0.0, 500, SPOT).unwrap());
        }
    }
    let truth = cir().apply(&BccParams { lambda: 0.3, mu_j: -0.1, delta: 0.05, ..BccParams::spy_lsm() });
    synthetic_chain(&truth, &template, &RegressorSpec::polynomial(), &mc(), &PricingOptions::default()).unwrap()
}

fn small_config() -> OptimizerConfig {
    let grid = BTreeMap::from([("rho".to_string(), vec![-0.9, -0.5]), ("lambda".to_string(), vec![0.0, 0.5])]);
    OptimizerConfig { max_evaluations: 15, restarts: 0, grid, ..OptimizerConfig::default() }
}

#[test]
fn objective_is_deterministic() {
    let quotes = chain(&[10, 30]);
    let spec = RegressorSpec::polynomial();
    let p = default_start(&cir());
    let a = ChainObjective::new(&quotes, &spec, mc(), PricingOptions::default()).unwrap().evaluate(&p);
    let b = ChainObjective::new(&quotes, &spec, mc(), PricingOptions::default()).unwrap().evaluate(&p);
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn stages_improve_and_respect_bounds() {
    let quotes = chain(&[10, 30]);
    let config = small_config();
    let report = calibrate_bcc(&quotes, &cir(), &RegressorSpec::polynomial(), &mc(), &config).unwrap();
    let numbers: Vec<u8> = report.stages.iter().map(|s| s.stage).collect();
    assert_eq!(numbers, [2, 3, 4]);
    assert!(report.skipped.is_empty());
    for s in &report.stages {
        assert!(s.objective_out <= s.objective_in, "stage {}", s.stage);
        assert!(s.evaluations >= 1 && s.wall_time >= 0.0);
    }
    assert_eq!(report.final_params, report.stages.last().unwrap().params_out);
    assert_eq!(report.final_params.r0, cir().r0);

    assert!(!report.evaluation_log.is_empty());
    for point in &report.evaluation_log {
        let values = point.params.to_array();
        // stage 2 holds the jump block at zero rather than searching it
        let free = if point.stage == 2 { 5 } else { 8 };
        for (i, name) in PARAM_NAMES.iter().enumerate().take(free) {
            let [lo, hi] = config.bounds[*name];
            assert!(values[i] >= lo && values[i] <= hi, "{name} = {} outside [{lo}, {hi}]", values[i]);
        }
    }
    // stage 2 keeps jumps off
    assert!(report.evaluation_log.iter().filter(|p| p.stage == 2).all(|p| p.params.lambda == 0.0));
}

#[test]
fn zero_budget_echoes_start() {
    let quotes = chain(&[10, 30]);
    let config = OptimizerConfig { max_evaluations: 0, grid: BTreeMap::new(), ..OptimizerConfig::default() };
    let report = calibrate_bcc(&quotes, &cir(), &RegressorSpec::polynomial(), &mc(), &config).unwrap();
    for s in &report.stages {
        assert_eq!(s.params_out, s.params_in);
        assert_eq!(s.objective_out, s.objective_in);
        assert_eq!(s.evaluations, 1);
    }
    let start = default_start(&cir());
    assert_eq!(report.stages[0].params_in, BccParams { lambda: 0.0, mu_j: 0.0, delta: 0.0, ..start });
}

#[test]
fn missing_short_maturities_skip_the_jump_stage() {
    let quotes = chain(&[28, 35]);
    let report = calibrate_bcc(&quotes, &cir(), &RegressorSpec::polynomial(), &mc(), &small_config()).unwrap();
    let numbers: Vec<u8> = report.stages.iter().map(|s| s.stage).collect();
    assert_eq!(numbers, [2, 4]);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].stage, 3);
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["skipped"][0]["stage"], 3);
}

#[test]
fn report_json_layout() {
    let quotes = chain(&[10]);
    let config = OptimizerConfig { max_evaluations: 3, restarts: 0, grid: BTreeMap::new(), ..OptimizerConfig::default() };
    let report = calibrate_bcc(&quotes, &cir(), &RegressorSpec::polynomial(), &mc(), &config).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let fin = json["final"].as_object().unwrap();
    assert_eq!(fin.len(), 12);
    for name in PARAM_NAMES {
        assert!(fin.contains_key(name), "{name}");
    }
    assert!(json.get("evaluation_log").is_none());
}

#[test]
fn invalid_config_rejected() {
    let quotes = chain(&[10]);
    let mut config = OptimizerConfig::default();
    config.bounds.insert("rho".into(), [0.5, -0.5]);
    assert!(calibrate_bcc(&quotes, &cir(), &RegressorSpec::polynomial(), &mc(), &config).is_err());
    assert!(calibrate_bcc(&[], &cir(), &RegressorSpec::polynomial(), &mc(), &OptimizerConfig::default()).is_err());
}
