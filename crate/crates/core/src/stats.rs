/// Sample mean and standard error of the mean.
///
/// With `paired` set, consecutive values `(2k, 2k+1)` are antithetic partners
/// and the error is computed from the pair averages, which are independent.
pub(crate) fn mean_and_se(values: &[f64], paired: bool) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if paired && n % 2 == 0 && n >= 4 {
        let m = n / 2;
        let var = values
            .chunks_exact(2)
            .map(|p| {
                let d = 0.5 * (p[0] + p[1]) - mean;
                d * d
            })
            .sum::<f64>()
            / (m - 1) as f64;
        return (mean, (var / m as f64).sqrt());
    }
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_paired() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0], false);
        assert_eq!(m, 2.5);
        // sample var 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        // perfectly antithetic pairs carry no noise
        let (m, se) = mean_and_se(&[1.0, -1.0, 2.0, -2.0], true);
        assert_eq!((m, se), (0.0, 0.0));
        assert_eq!(mean_and_se(&[3.0], false), (3.0, 0.0));
    }
}
