use super::OptimizerConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub min_value: f64,
    /// Objective calls, the start point included.
    pub evaluations: usize,
}

struct Counted<'a, F> {
    f: &'a mut F,
    calls: usize,
    budget: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn exhausted(&self) -> bool {
        self.calls > self.budget
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn clamp(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

fn along(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimize `objective` with the Nelder-Mead simplex method. Proposed points
/// are clamped into `bounds`. The returned value never exceeds the objective
/// at `start`.
pub fn nelder_mead<F>(
    mut objective: F,
    start: &[f64],
    config: &OptimizerConfig,
    bounds: Option<&[(f64, f64)]>,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    if let Some(b) = bounds {
        if b.len() != dim {
            return Err(Error::invalid(format!("{} bounds for {dim} coordinates", b.len())));
        }
        if let Some((lo, hi)) = b.iter().find(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::invalid(format!("bound [{lo}, {hi}] must be finite with lo < hi")));
        }
    }
    let mut f = Counted { f: &mut objective, calls: 0, budget: config.max_evaluations };
    let mut x0 = start.to_vec();
    clamp(&mut x0, bounds);
    let f0 = f.eval(&x0);
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective at the start point"));
    }
    if dim == 0 || config.max_evaluations == 0 {
        return Ok(Minimum { argmin: x0, min_value: f0, evaluations: f.calls });
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
    for i in 0..dim {
        if f.exhausted() {
            break;
        }
        let mut x = x0.clone();
        match bounds {
            Some(b) => {
                let (lo, hi) = b[i];
                let step = config.initial_step * (hi - lo);
                x[i] = if x[i] + step <= hi { x[i] + step } else { x[i] - step };
            }
            None => x[i] += config.initial_step * x[i].abs().max(1.0),
        }
        clamp(&mut x, bounds);
        let fx = f.eval(&x);
        simplex.push((x, fx));
    }
    if simplex.len() < dim + 1 {
        return Ok(best_of(simplex, f.calls));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst - best <= config.tolerance || f.exhausted() {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let second_worst = simplex[dim - 1].1;
        let xw = simplex[dim].0.clone();

        let mut xr = along(&centroid, &xw, -config.reflection);
        clamp(&mut xr, bounds);
        let fr = f.eval(&xr);

        if fr < best {
            if f.exhausted() {
                simplex[dim] = (xr, fr);
                continue;
            }
            let mut xe = along(&centroid, &xr, config.expansion);
            clamp(&mut xe, bounds);
            let fe = f.eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[dim] = (xr, fr);
            continue;
        }
        if f.exhausted() {
            if fr < worst {
                simplex[dim] = (xr, fr);
            }
            continue;
        }
        // contraction: outside when the reflection improved on the worst point
        let (xc, fc, accept) = if fr < worst {
            let mut xc = along(&centroid, &xr, config.contraction);
            clamp(&mut xc, bounds);
            let fc = f.eval(&xc);
            (xc, fc, fc <= fr)
        } else {
            let mut xc = along(&centroid, &xw, config.contraction);
            clamp(&mut xc, bounds);
            let fc = f.eval(&xc);
            (xc, fc, fc < worst)
        };
        if accept {
            simplex[dim] = (xc, fc);
            continue;
        }
        let xb = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if f.exhausted() {
                break;
            }
            let mut x = along(&xb, &vertex.0, config.shrink);
            clamp(&mut x, bounds);
            let fx = f.eval(&x);
            *vertex = (x, fx);
        }
    }
    Ok(best_of(simplex, f.calls))
}

fn best_of(simplex: Vec<(Vec<f64>, f64)>, evaluations: usize) -> Minimum {
    // first minimum wins, so the start point is kept on ties
    let (argmin, min_value) = simplex
        .into_iter()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("simplex has the start point");
    Minimum { argmin, min_value, evaluations }
}
