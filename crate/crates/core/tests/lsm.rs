use bcc_lsm::binomial::binomial_european_put;
use bcc_lsm::lsm::european_put;
use bcc_lsm::{
    binomial_put, continuation_surface, price_american_put, simulate, BccParams, BsSetup, Error, FeatureSet, GridSpec,
    PricingOptions, PutContract, RegressorSpec,
};

fn bs_grid(paths: usize, seed: u64) -> bcc_lsm::PathGrid {
    let spec = GridSpec { s0: 36.0, horizon: 1.0, steps: 20, paths, seed, antithetic: true, moment_match: true };
    simulate(&BccParams::black_scholes(0.2, 0.06), &spec).unwrap()
}

const PUT: PutContract = PutContract { strike: 40.0, maturity: 1.0 };

#[test]
fn american_above_european_and_intrinsic() {
    let grid = bs_grid(10_000, 3);
    let am = price_american_put(&grid, &PUT, &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap();
    let (eu, eu_se) = european_put(&grid, &PUT).unwrap();
    assert!(am.price >= eu - 3.0 * eu_se, "{} vs {eu}", am.price);
    assert!(am.price >= 4.0 && am.price <= 40.0);
    let tree_eu = binomial_european_put(&BsSetup::benchmark()).unwrap();
    assert!((eu - tree_eu).abs() < 3.0 * eu_se + 0.01, "{eu} vs {tree_eu}");
}

#[test]
fn exercise_fractions_sum_to_at_most_one() {
    let grid = bs_grid(4000, 8);
    let r = price_american_put(&grid, &PUT, &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap();
    let total: f64 = r.exercise_fraction.iter().sum();
    assert_eq!(r.exercise_fraction.len(), 21);
    assert!(total <= 1.0 + 1e-12 && total > 0.5);
}

#[test]
fn option_variants_stay_near_the_tree() {
    let grid = bs_grid(20_000, 2);
    let reference = binomial_put(&BsSetup::benchmark()).unwrap();
    let variants = [
        PricingOptions { control_variate: true, ..PricingOptions::default() },
        PricingOptions { features: FeatureSet::FullState, ..PricingOptions::default() },
        PricingOptions { itm_only: false, ..PricingOptions::default() },
    ];
    for options in variants {
        let r = price_american_put(&grid, &PUT, &RegressorSpec::polynomial(), &options).unwrap();
        assert!((r.price - reference).abs() < 0.1, "{options:?}: {}", r.price);
    }
}

#[test]
fn deep_in_the_money_exercises_now() {
    let grid = bs_grid(1000, 1);
    let deep = PutContract { strike: 100.0, maturity: 1.0 };
    let r = price_american_put(&grid, &deep, &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap();
    assert_eq!(r.price, 64.0);
    assert_eq!(r.exercise_fraction[0], 1.0);
}

#[test]
fn preconditions() {
    let small = simulate(
        &BccParams::black_scholes(0.2, 0.06),
        &GridSpec { s0: 36.0, horizon: 1.0, steps: 5, paths: 50, seed: 1, antithetic: true, moment_match: false },
    )
    .unwrap();
    let err = price_american_put(&small, &PUT, &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)));
    let grid = bs_grid(200, 1);
    let wrong = PutContract { strike: 40.0, maturity: 0.5 };
    assert!(price_american_put(&grid, &wrong, &RegressorSpec::polynomial(), &PricingOptions::default()).is_err());
}

#[test]
fn surface_targets_are_discounted_cashflows() {
    let grid = bs_grid(2000, 4);
    let rows = continuation_surface(&grid, &PUT, &RegressorSpec::polynomial(), &PricingOptions::default(), 10).unwrap();
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r.index < 40.0);
        assert!((r.features[0] - r.index / 40.0).abs() < 1e-15);
        assert!(r.target >= 0.0 && r.target <= 40.0);
    }
    let mean_target = rows.iter().map(|r| r.target).sum::<f64>() / rows.len() as f64;
    let mean_fit = rows.iter().map(|r| r.fitted).sum::<f64>() / rows.len() as f64;
    assert!((mean_target - mean_fit).abs() < 1e-8, "least squares with an intercept preserves the mean");
    assert!(continuation_surface(&grid, &PUT, &RegressorSpec::polynomial(), &PricingOptions::default(), 20).is_err());
}

#[test]
fn stochastic_volatility_prices_are_sane() {
    let spec = GridSpec { s0: 100.0, horizon: 0.25, steps: 12, paths: 5000, seed: 10, antithetic: true, moment_match: true };
    let grid = simulate(&BccParams::spy_lsm(), &spec).unwrap();
    let mut last = 0.0;
    for strike in [90.0, 95.0, 100.0, 105.0, 110.0] {
        let c = PutContract { strike, maturity: 0.25 };
        let p = price_american_put(&grid, &c, &RegressorSpec::polynomial(), &PricingOptions::default()).unwrap().price;
        assert!(p >= (strike - 100.0f64).max(0.0) && p > last, "K={strike}: {p}");
        last = p;
    }
}
