//! Continuation-value regressors behind one `fit` / `predict` interface.
//!
//! Every regressor standardizes its features with training-set mean and
//! standard deviation before fitting; the MLP also standardizes targets.

mod mlp;
mod polynomial;
mod trees;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mlp::{gradient_check, gradient_check_network, GradientHook, MlpNetwork};
pub use polynomial::{monomial_exponents, PolynomialModel};
pub use trees::{RegressionTree, TreeEnsemble};

fn default_tolerance() -> f64 {
    1e-4
}

fn default_patience() -> usize {
    10
}

fn default_max_bins() -> usize {
    64
}

/// Declarative regressor configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressorSpec {
    /// Monomials of total degree `0..=degree`. `terms` keeps only the first
    /// `terms` basis functions (ordered by degree).
    Polynomial {
        degree: usize,
        #[serde(default)]
        terms: Option<usize>,
    },
    /// Squared-error gradient boosting of depth-limited regression trees.
    /// Split candidates sit on at most `max_bins` quantile boundaries per
    /// feature.
    BoostedTrees {
        estimators: usize,
        max_depth: usize,
        learning_rate: f64,
        #[serde(default = "default_max_bins")]
        max_bins: usize,
    },
    /// ReLU feed-forward network trained by mini-batch Adam. Training stops
    /// early once the epoch loss has failed to improve by `tolerance` for
    /// `patience` consecutive epochs.
    Mlp {
        hidden_layers: Vec<usize>,
        batch_size: usize,
        epochs: usize,
        learning_rate: f64,
        seed: u64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_patience")]
        patience: usize,
    },
}

impl RegressorSpec {
    /// Degree-5 polynomial (six terms for one feature).
    pub fn polynomial() -> Self {
        RegressorSpec::Polynomial { degree: 5, terms: None }
    }

    /// 50 trees of depth 3, shrinkage 0.1.
    pub fn boosted_trees() -> Self {
        RegressorSpec::BoostedTrees { estimators: 50, max_depth: 3, learning_rate: 0.1, max_bins: default_max_bins() }
    }

    /// Four hidden layers of 20 units, batch 256, Adam step 1e-3, 200 epochs.
    pub fn mlp() -> Self {
        RegressorSpec::Mlp {
            hidden_layers: vec![20; 4],
            batch_size: 256,
            epochs: 200,
            learning_rate: 1e-3,
            seed: 0,
            tolerance: default_tolerance(),
            patience: default_patience(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegressorSpec::Polynomial { .. } => "polynomial",
            RegressorSpec::BoostedTrees { .. } => "boosted_trees",
            RegressorSpec::Mlp { .. } => "mlp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorSpec::Polynomial { terms, .. } => {
                if *terms == Some(0) {
                    return Err(Error::invalid("polynomial needs at least one basis term"));
                }
            }
            RegressorSpec::BoostedTrees { estimators, max_depth, learning_rate, max_bins } => {
                if *max_bins < 2 {
                    return Err(Error::invalid("max_bins must be >= 2"));
                }
                if *estimators < 1 {
                    return Err(Error::invalid("estimators must be >= 1"));
                }
                if *max_depth < 1 {
                    return Err(Error::invalid("max_depth must be >= 1"));
                }
                if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    return Err(Error::invalid(format!("learning_rate must lie in (0, 1], got {learning_rate}")));
                }
            }
            RegressorSpec::Mlp { hidden_layers, batch_size, learning_rate, tolerance, .. } => {
                if hidden_layers.iter().any(|&w| w < 1) {
                    return Err(Error::invalid("hidden layer widths must be >= 1"));
                }
                if *batch_size < 1 {
                    return Err(Error::invalid("batch_size must be >= 1"));
                }
                if !(*learning_rate > 0.0 && learning_rate.is_finite()) {
                    return Err(Error::invalid(format!("learning_rate must be positive, got {learning_rate}")));
                }
                if !(*tolerance >= 0.0) {
                    return Err(Error::invalid("tolerance must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for col in x.column_iter() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            // constant features are only centred
            scale.push(if sd > 1e-12 * m.abs().max(1.0) { sd } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn identity(features: usize) -> Self {
        Standardizer { mean: vec![0.0; features], scale: vec![1.0; features] }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Polynomial(PolynomialModel),
    Trees(TreeEnsemble),
    Mlp(MlpNetwork),
}

/// A trained regressor. Immutable; `predict` is a pure function of it.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedRegressor {
    pub spec: RegressorSpec,
    pub features: Standardizer,
    /// `(mean, scale)` applied to targets during training (MLP only).
    pub target: (f64, f64),
    pub state: Trained,
}

impl FittedRegressor {
    /// Wrap a raw network with identity feature and target scaling.
    pub fn from_network(spec: RegressorSpec, network: MlpNetwork) -> Self {
        FittedRegressor {
            spec,
            features: Standardizer::identity(network.inputs()),
            target: (0.0, 1.0),
            state: Trained::Mlp(network),
        }
    }

    pub fn feature_count(&self) -> usize {
        self.features.features()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        predict(self, x)
    }
}

fn check_finite(x: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Train the regressor described by `spec` on rows of `x` against `y`.
pub fn fit(spec: &RegressorSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<FittedRegressor> {
    spec.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("regression needs at least one sample"));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("regression needs at least one feature"));
    }
    if y.len() != x.nrows() {
        return Err(Error::invalid(format!("{} targets for {} samples", y.len(), x.nrows())));
    }
    check_finite(x, "regression features")?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("regression targets"));
    }

    let features = Standardizer::fit(x);
    let xs = features.apply(x);
    let (target, state) = match spec {
        RegressorSpec::Polynomial { degree, terms } => {
            let model = PolynomialModel::fit(&xs, y, *degree, *terms)?;
            ((0.0, 1.0), Trained::Polynomial(model))
        }
        RegressorSpec::BoostedTrees { estimators, max_depth, learning_rate, max_bins } => {
            let model = TreeEnsemble::fit(&xs, y, *estimators, *max_depth, *learning_rate, *max_bins);
            ((0.0, 1.0), Trained::Trees(model))
        }
        RegressorSpec::Mlp { .. } => {
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
            let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
            let net = MlpNetwork::train(spec, &xs, &ys)?;
            ((mean, scale), Trained::Mlp(net))
        }
    };
    Ok(FittedRegressor { spec: spec.clone(), features, target, state })
}

/// Evaluate a fitted regressor on the rows of `x`.
pub fn predict(model: &FittedRegressor, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.feature_count() {
        return Err(Error::FeatureMismatch { expected: model.feature_count(), got: x.ncols() });
    }
    check_finite(x, "prediction features")?;
    let xs = model.features.apply(x);
    let raw = match &model.state {
        Trained::Polynomial(p) => p.predict(&xs),
        Trained::Trees(t) => t.predict(&xs),
        Trained::Mlp(n) => n.predict(&xs),
    };
    let (mean, scale) = model.target;
    let out: Vec<f64> = raw.into_iter().map(|v| v * scale + mean).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite("regressor output"))
    }
}
