//! Random draws and path simulation for the stochastic-volatility,
//! stochastic-rate jump-diffusion.

mod draws;
mod params;
mod simulate;

pub use draws::{generate_draws, moment_match, BaseDraws, DrawBlock};
pub use params::{BccParams, GridSpec, PARAM_NAMES};
#[doc(hidden)]
pub use simulate::{simulate_from_draws, simulate_with_hooks, SimulationHooks};
pub use simulate::{martingale_diagnostic, simulate, PathGrid};
