//! Bounded Nelder-Mead on the Rosenbrock valley.

use bcc_lsm::{nelder_mead, OptimizerConfig};

fn main() -> bcc_lsm::Result<()> {
    let rosenbrock = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let config = OptimizerConfig { max_evaluations: 2000, ..OptimizerConfig::default() };
    let free = nelder_mead(rosenbrock, &[-1.2, 1.0], &config, None)?;
    println!("unbounded  argmin {:?}  f {:.3e}  evaluations {}", free.argmin, free.min_value, free.evaluations);

    let bounds = [(-2.0, 0.5), (-1.0, 2.0)];
    let boxed = nelder_mead(rosenbrock, &[-1.2, 1.0], &config, Some(&bounds))?;
    println!("x <= 0.5   argmin {:?}  f {:.3e}  evaluations {}", boxed.argmin, boxed.min_value, boxed.evaluations);
    Ok(())
}
