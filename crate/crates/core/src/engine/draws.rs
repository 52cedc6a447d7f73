//! Random inputs for the path simulator.
//!
//! Draw order: every base path `p` owns the ChaCha8 stream `p` of the
//! generator seeded with `seed`. From that stream it draws, step by step,
//! `steps` values each of `w1`, `w2`, `z3` and `z4` (in that order, one
//! matrix row at a time), followed by the Poisson jump counts of the paths it
//! feeds. With antithetic sampling on, base path `k` feeds paths `2k` and
//! `2k + 1`, the latter receiving the negated normals; otherwise base path
//! `p` feeds path `p`. Since each base path has its own stream, the result
//! does not depend on how rows are spread over worker threads.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::GridSpec;
use crate::error::{Error, Result};

/// Standard normals and Poisson counts, each matrix `paths x steps`.
///
/// `z2 = rho * z1 + sqrt(1 - rho^2) * w2`; `z3` (short rate) and `z4`
/// (jump size) are independent of both.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawBlock {
    pub z1: DMatrix<f64>,
    pub z2: DMatrix<f64>,
    pub z3: DMatrix<f64>,
    pub z4: DMatrix<f64>,
    pub jumps: DMatrix<u32>,
}

struct BaseRow {
    normals: [Vec<f64>; 4],
    /// Generator state right after the normals; jump counts come next.
    rng: ChaCha8Rng,
}

fn draw_base_row(seed: u64, base: usize, steps: usize) -> BaseRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(base as u64);
    let normals = std::array::from_fn(|_| {
        (0..steps)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect::<Vec<f64>>()
    });
    BaseRow { normals, rng }
}

/// Shift and scale every column to sample mean 0 and (population) standard
/// deviation 1. Columns with zero spread are only centred.
pub fn moment_match(m: &mut DMatrix<f64>) {
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
        for x in col.iter_mut() {
            *x = (*x - mean) * scale;
        }
    }
}

/// The parameter-free part of a [`DrawBlock`]: raw normals for every path
/// plus each base path's generator state, from which the correlation and
/// jump intensity can be applied repeatedly without redrawing.
#[derive(Debug, Clone)]
pub struct BaseDraws {
    spec: GridSpec,
    /// `w1`, `w2`, `z3`, `z4` before correlation and moment matching.
    raw: [DMatrix<f64>; 4],
    states: Vec<ChaCha8Rng>,
}

impl BaseDraws {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let (paths, steps) = (spec.paths, spec.steps);
        let bases = if spec.antithetic { paths / 2 } else { paths };
        let rows: Vec<BaseRow> = (0..bases)
            .into_par_iter()
            .map(|b| draw_base_row(spec.seed, b, steps))
            .collect();

        let mut raw = std::array::from_fn(|_| DMatrix::zeros(paths, steps));
        for (k, target) in raw.iter_mut().enumerate() {
            for t in 0..steps {
                let mut col = target.column_mut(t);
                for (b, row) in rows.iter().enumerate() {
                    let x = row.normals[k][t];
                    if spec.antithetic {
                        col[2 * b] = x;
                        col[2 * b + 1] = -x;
                    } else {
                        col[b] = x;
                    }
                }
            }
        }
        let states = rows.into_iter().map(|r| r.rng).collect();
        Ok(BaseDraws { spec: *spec, raw, states })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Correlate, moment-match and draw jump counts; identical to
    /// [`generate_draws`] with the same arguments.
    pub fn finish(&self, rho: f64, jump_intensity: f64) -> Result<DrawBlock> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [-1, 1], got {rho}")));
        }
        if !(jump_intensity >= 0.0 && jump_intensity.is_finite()) {
            return Err(Error::invalid(format!("jump intensity must be >= 0, got {jump_intensity}")));
        }
        let spec = &self.spec;
        let (paths, steps) = (spec.paths, spec.steps);
        let mean_jumps = jump_intensity * spec.dt();
        let mut jumps = DMatrix::<u32>::zeros(paths, steps);
        if mean_jumps > 0.0 {
            let dist = Poisson::new(mean_jumps).map_err(|e| Error::invalid(e.to_string()))?;
            let fed = if spec.antithetic { 2 } else { 1 };
            let counts: Vec<Vec<u32>> = self
                .states
                .par_iter()
                .map(|state| {
                    let mut rng = state.clone();
                    (0..fed * steps).map(|_| dist.sample(&mut rng) as u32).collect()
                })
                .collect();
            for (b, row) in counts.iter().enumerate() {
                for j in 0..fed {
                    for t in 0..steps {
                        jumps[(b * fed + j, t)] = row[j * steps + t];
                    }
                }
            }
        }

        let [w1, w2, z3, z4] = &self.raw;
        let ortho = (1.0 - rho * rho).max(0.0).sqrt();
        let mut z2 = w1.zip_map(w2, |a, b| rho * a + ortho * b);
        let (mut z1, mut z3, mut z4) = (w1.clone(), z3.clone(), z4.clone());
        if spec.moment_match {
            for m in [&mut z1, &mut z2, &mut z3, &mut z4] {
                moment_match(m);
            }
        }
        Ok(DrawBlock { z1, z2, z3, z4, jumps })
    }
}

/// Generate the draws for `spec`; `jump_intensity` is the annual Poisson rate.
pub fn generate_draws(spec: &GridSpec, rho: f64, jump_intensity: f64) -> Result<DrawBlock> {
    BaseDraws::new(spec)?.finish(rho, jump_intensity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(paths: usize, antithetic: bool, moment_match: bool) -> GridSpec {
        GridSpec { s0: 100.0, horizon: 1.0, steps: 5, paths, seed: 7, antithetic, moment_match }
    }

    #[test]
    fn antithetic_columns_sum_to_zero() {
        let d = generate_draws(&spec(100, true, false), 0.3, 0.0).unwrap();
        for m in [&d.z1, &d.z2, &d.z3, &d.z4] {
            for col in m.column_iter() {
                assert!(col.iter().sum::<f64>().abs() < 1e-12);
            }
        }
        for k in 0..50 {
            assert_eq!(d.z1[(2 * k, 3)], -d.z1[(2 * k + 1, 3)]);
        }
    }

    #[test]
    fn moment_matched_columns() {
        let d = generate_draws(&spec(101, false, true), -0.7, 0.0).unwrap();
        for m in [&d.z1, &d.z2, &d.z3, &d.z4] {
            for col in m.column_iter() {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                assert!(mean.abs() < 1e-12);
                assert!((sd - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_jumps_without_intensity() {
        let d = generate_draws(&spec(50, false, false), 0.0, 0.0).unwrap();
        assert!(d.jumps.iter().all(|&c| c == 0));
    }

    #[test]
    fn poisson_mean() {
        let s = GridSpec { steps: 10, ..spec(20_000, false, false) };
        let d = generate_draws(&s, 0.0, 2.0).unwrap();
        let mean = d.jumps.iter().map(|&c| c as f64).sum::<f64>() / d.jumps.len() as f64;
        // mean 0.2 per cell, sd of the average sqrt(0.2 / 200000) ~ 1e-3
        assert!((mean - 0.2).abs() < 5e-3, "{mean}");
    }

    #[test]
    fn correlation_targets_rho() {
        let d = generate_draws(&spec(40_000, false, false), -0.8, 0.0).unwrap();
        let n = d.z1.nrows() as f64;
        let corr = d.z1.column(0).dot(&d.z2.column(0)) / n;
        assert!((corr + 0.8).abs() < 0.02, "{corr}");
        let corr13 = d.z1.column(0).dot(&d.z3.column(0)) / n;
        assert!(corr13.abs() < 0.03);
    }

    #[test]
    fn deterministic_and_odd_paths_rejected() {
        let a = generate_draws(&spec(64, true, true), 0.1, 1.0).unwrap();
        let b = generate_draws(&spec(64, true, true), 0.1, 1.0).unwrap();
        assert_eq!(a, b);
        let c = generate_draws(&GridSpec { seed: 8, ..spec(64, true, true) }, 0.1, 1.0).unwrap();
        assert_ne!(a.z1, c.z1);
        assert!(generate_draws(&spec(63, true, false), 0.0, 0.0).is_err());
    }
}
