//! Polynomial, boosted trees and MLP fitted to the same noisy
//! one-dimensional sample.

use bcc_lsm::{fit, predict, RegressorSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bcc_lsm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 2000;
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.1)).collect();
    let truth = |x: f64| (1.0 - x).max(0.0) * 40.0 + 0.5 * (8.0 * x).sin();
    let ys: Vec<f64> = xs.iter().map(|&x| truth(x) + 0.3 * rng.gen_range(-1.0..1.0)).collect();
    let x = DMatrix::from_column_slice(n, 1, &xs);

    let grid: Vec<f64> = (0..=10).map(|i| 0.6 + 0.05 * i as f64).collect();
    let xg = DMatrix::from_column_slice(grid.len(), 1, &grid);
    let specs = [RegressorSpec::polynomial(), RegressorSpec::boosted_trees(), RegressorSpec::mlp()];
    let mut columns = Vec::new();
    for spec in &specs {
        let model = fit(spec, &x, &ys)?;
        let train = predict(&model, &x)?;
        let mse = train.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        println!("{:<14} training mse {mse:.4}", spec.name());
        columns.push(predict(&model, &xg)?);
    }
    println!("\n{:>5} {:>8} {:>10} {:>10} {:>10}", "x", "truth", "poly", "trees", "mlp");
    for (i, xv) in grid.iter().enumerate() {
        println!("{xv:>5.2} {:>8.3} {:>10.3} {:>10.3} {:>10.3}", truth(*xv), columns[0][i], columns[1][i], columns[2][i]);
    }
    Ok(())
}
