use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Multi-indices of total degree `0..=degree` over `features` variables,
/// ordered by degree and then lexicographically (highest power of the first
/// feature first).
pub fn monomial_exponents(features: usize, degree: usize) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, left: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for p in (0..=remaining).rev() {
            prefix.push(p);
            fill(prefix, left - 1, remaining - p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree as u32 {
        fill(&mut Vec::with_capacity(features), features, d, &mut out);
    }
    out
}

/// Least-squares fit on a monomial basis of standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    pub exponents: Vec<Vec<u32>>,
    /// One coefficient per basis term, in standardized coordinates.
    pub coefficients: Vec<f64>,
}

impl PolynomialModel {
    /// `x` must already be standardized.
    pub(super) fn fit(x: &DMatrix<f64>, y: &[f64], degree: usize, terms: Option<usize>) -> Result<Self> {
        let mut exponents = monomial_exponents(x.ncols(), degree);
        if let Some(t) = terms {
            exponents.truncate(t);
        }
        let design = Self::design(x, &exponents);
        let coefficients = min_norm_least_squares(design, DVector::from_column_slice(y))?;
        if !coefficients.iter().all(|c| c.is_finite()) {
            return Err(Error::Training("polynomial coefficients are not finite".into()));
        }
        Ok(PolynomialModel { exponents, coefficients: coefficients.as_slice().to_vec() })
    }

    fn design(x: &DMatrix<f64>, exponents: &[Vec<u32>]) -> DMatrix<f64> {
        let (n, f) = x.shape();
        let top = exponents.iter().flatten().copied().max().unwrap_or(0) as usize;
        // powers[j][p * n + i] holds x[(i, j)]^p
        let powers: Vec<Vec<f64>> = x
            .as_slice()
            .chunks_exact(n.max(1))
            .take(f)
            .map(|col| {
                let mut table = vec![1.0; n * (top + 1)];
                for p in 1..=top {
                    let (done, rest) = table.split_at_mut(p * n);
                    let prev = &done[(p - 1) * n..];
                    for ((out, a), b) in rest[..n].iter_mut().zip(prev).zip(col) {
                        *out = a * b;
                    }
                }
                table
            })
            .collect();
        let mut design = DMatrix::from_element(n, exponents.len(), 1.0);
        for (column, exps) in design.as_mut_slice().chunks_exact_mut(n.max(1)).zip(exponents) {
            for (j, &p) in exps.iter().enumerate() {
                if p > 0 {
                    let pw = &powers[j][p as usize * n..(p as usize + 1) * n];
                    for (v, w) in column.iter_mut().zip(pw) {
                        *v *= w;
                    }
                }
            }
        }
        design
    }

    /// Basis columns evaluated at standardized `x`.
    pub fn design_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        Self::design(x, &self.exponents)
    }

    pub(super) fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let design = Self::design(x, &self.exponents);
        (design * DVector::from_column_slice(&self.coefficients)).as_slice().to_vec()
    }

    /// Coefficients on raw (unstandardized) monomials, obtained by expanding
    /// `prod_j ((x_j - mean_j) / scale_j)^p_j`. Keys are exponent vectors.
    pub fn raw_coefficients(&self, mean: &[f64], scale: &[f64]) -> BTreeMap<Vec<u32>, f64> {
        let mut out: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (exps, &c) in self.exponents.iter().zip(&self.coefficients) {
            // expand one feature at a time
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), c)];
            for (j, &p) in exps.iter().enumerate() {
                let inv = 1.0 / scale[j];
                let mut next = Vec::with_capacity(partial.len() * (p as usize + 1));
                for (prefix, coef) in &partial {
                    for k in 0..=p {
                        // C(p, k) x^k (-mean)^(p-k) / scale^p
                        let w = binomial(p, k) * (-mean[j]).powi((p - k) as i32) * inv.powi(p as i32);
                        let mut e = prefix.clone();
                        e.push(k);
                        next.push((e, coef * w));
                    }
                }
                partial = next;
            }
            for (e, v) in partial {
                *out.entry(e).or_insert(0.0) += v;
            }
        }
        out
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Minimum-norm solution of `min ||A c - y||` via Householder QR followed by
/// an SVD of the small triangular factor, so rank-deficient designs get the
/// pseudo-inverse answer instead of an error.
fn min_norm_least_squares(a: DMatrix<f64>, y: DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = a.shape();
    if n >= p {
        let qr = a.qr();
        let mut qty = y;
        qr.q_tr_mul(&mut qty);
        pinv_solve(qr.r(), qty.rows(0, p).into_owned())
    } else {
        pinv_solve(a, y)
    }
}

fn pinv_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * 1e-12;
    svd.solve(&b, eps)
        .map_err(|e| Error::Training(format!("least-squares solve failed: {e}")))
}
