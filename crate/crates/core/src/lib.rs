//! American put pricing by least-squares Monte Carlo under a
//! stochastic-volatility, stochastic-rate jump-diffusion (Bakshi-Cao-Chen).
//!
//! The crate is organised bottom-up:
//!
//! * [`engine`] draws correlated normals and simulates index, variance and
//!   short-rate paths with pathwise discount factors.
//! * [`regressors`] holds the continuation-value regressors: polynomial
//!   least squares, gradient-boosted trees and a multilayer perceptron.
//! * [`lsm`] runs the backward induction over a simulated grid.
//! * [`binomial`] is a Cox-Ross-Rubinstein tree used as a reference price.
//! * [`calibration`] fits the short-rate model to zero-coupon bonds and the
//!   equity parameters to an option chain in four stages.
//! * [`market_data`] loads chains, filters them and produces bucketed
//!   pricing-error reports.
//! * [`config`] and [`commands`] wire everything into the `bcc-lsm` binary.

pub mod binomial;
pub mod calibration;
pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod lsm;
pub mod market_data;
pub mod regressors;
mod stats;

pub use engine::{generate_draws, martingale_diagnostic, simulate, BccParams, DrawBlock, GridSpec, PathGrid};
pub use error::{Error, Result};
pub use market_data::{apply_filters, bucketize, load_bonds, load_chain, mse_report, Bucket, BucketReport, OptionQuote, ZeroBondQuote};
pub use regressors::{fit, predict, FittedRegressor, RegressorSpec};
pub use calibration::{calibrate, calibrate_bcc, calibrate_cir, cir_bond_price, nelder_mead, CalibrationReport, CirParams, OptimizerConfig};
pub use binomial::{binomial_put, BsSetup};
pub use lsm::{continuation_surface, price_american_put, FeatureSet, PricingOptions, PricingResult, PutContract};
