use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::RegressorSpec;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// `inputs x outputs`; activations are row vectors.
    weights: DMatrix<f64>,
    bias: DVector<f64>,
}

/// Feed-forward network: ReLU on hidden layers, identity output, loss
/// `sum((yhat - y)^2) / (2 n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    /// Mean training loss per completed epoch.
    pub loss_curve: Vec<f64>,
}

/// Mutation switch for [`gradient_check_network`]: negates the analytic
/// gradient of one layer.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientHook {
    pub negate_layer: Option<usize>,
}

type Gradients = Vec<(DMatrix<f64>, DVector<f64>)>;

fn relu(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| v.max(0.0))
}

impl MlpNetwork {
    /// Network of the given layer sizes (inputs first, output last) with all
    /// weights and biases zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Layer { weights: DMatrix::zeros(w[0], w[1]), bias: DVector::zeros(w[1]) })
            .collect();
        MlpNetwork { layers, loss_curve: Vec::new() }
    }

    /// Glorot-uniform initialization: weights then biases of each layer, in
    /// layer order and row-major within a layer, drawn from
    /// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))` using ChaCha8
    /// seeded with `seed`.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let (fan_in, fan_out) = layer.weights.shape();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for i in 0..fan_in {
                for j in 0..fan_out {
                    layer.weights[(i, j)] = dist.sample(&mut rng);
                }
            }
            for j in 0..fan_out {
                layer.bias[j] = dist.sample(&mut rng);
            }
        }
        net
    }

    fn sizes_for(spec: &RegressorSpec, inputs: usize) -> Result<Vec<usize>> {
        let RegressorSpec::Mlp { hidden_layers, .. } = spec else {
            return Err(Error::invalid(format!("expected an mlp spec, got {}", spec.name())));
        };
        let mut sizes = vec![inputs];
        sizes.extend(hidden_layers);
        sizes.push(1);
        Ok(sizes)
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weights.nrows())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Pre-activations of every layer.
    fn forward(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &act * &layer.weights;
            for mut row in z.row_iter_mut() {
                row += layer.bias.transpose();
            }
            if k + 1 < self.layers.len() {
                act = relu(&z);
            }
            pre.push(z);
        }
        pre
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let pre = self.forward(x);
        pre.last().expect("network has layers").column(0).iter().cloned().collect()
    }

    pub fn loss(&self, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let out = self.predict(x);
        out.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * y.len() as f64)
    }

    fn gradients(&self, x: &DMatrix<f64>, y: &[f64], hook: GradientHook) -> (f64, Gradients) {
        let n = y.len() as f64;
        let pre = self.forward(x);
        let out = pre.last().expect("network has layers");
        let mut loss = 0.0;
        let mut delta = DMatrix::from_fn(y.len(), 1, |i, _| {
            let r = out[(i, 0)] - y[i];
            loss += r * r;
            r / n
        });
        loss /= 2.0 * n;

        let mut grads: Gradients = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let input = if k == 0 { x.clone() } else { relu(&pre[k - 1]) };
            let gw = input.transpose() * &delta;
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if k > 0 {
                let back = &delta * self.layers[k].weights.transpose();
                delta = back.zip_map(&pre[k - 1], |d, z| if z > 0.0 { d } else { 0.0 });
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        if let Some(k) = hook.negate_layer {
            if let Some((gw, gb)) = grads.get_mut(k) {
                gw.neg_mut();
                gb.neg_mut();
            }
        }
        (loss, grads)
    }

    fn param_mut(&mut self, idx: usize) -> &mut f64 {
        let mut idx = idx;
        for layer in &mut self.layers {
            if idx < layer.weights.len() {
                return &mut layer.weights.as_mut_slice()[idx];
            }
            idx -= layer.weights.len();
            if idx < layer.bias.len() {
                return &mut layer.bias.as_mut_slice()[idx];
            }
            idx -= layer.bias.len();
        }
        panic!("parameter index out of range")
    }

    /// Mini-batch Adam on standardized `x`, `y`.
    pub(super) fn train(spec: &RegressorSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let RegressorSpec::Mlp { batch_size, epochs, learning_rate, seed, tolerance, patience, .. } = spec else {
            return Err(Error::invalid(format!("expected an mlp spec, got {}", spec.name())));
        };
        let sizes = Self::sizes_for(spec, x.ncols())?;
        let mut net = Self::init(&sizes, *seed);
        // shuffles continue the initialization stream's seed family on a separate stream
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        rng.set_stream(1);

        let mut m: Gradients = net
            .layers
            .iter()
            .map(|l| (DMatrix::zeros(l.weights.nrows(), l.weights.ncols()), DVector::zeros(l.bias.len())))
            .collect();
        let mut v = m.clone();
        let mut step = 0i32;

        let n = y.len();
        let batch = (*batch_size).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0usize;

        for _ in 0..*epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let xb = DMatrix::from_fn(chunk.len(), x.ncols(), |i, j| x[(chunk[i], j)]);
                let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
                let (loss, grads) = net.gradients(&xb, &yb, GradientHook::default());
                epoch_loss += loss * chunk.len() as f64;

                step += 1;
                let c1 = 1.0 - BETA1.powi(step);
                let c2 = 1.0 - BETA2.powi(step);
                let lr = learning_rate * c2.sqrt() / c1;
                for ((layer, (gw, gb)), ((mw, mb), (vw, vb))) in
                    net.layers.iter_mut().zip(&grads).zip(m.iter_mut().zip(v.iter_mut()))
                {
                    adam(layer.weights.as_mut_slice(), gw.as_slice(), mw.as_mut_slice(), vw.as_mut_slice(), lr);
                    adam(layer.bias.as_mut_slice(), gb.as_slice(), mb.as_mut_slice(), vb.as_mut_slice(), lr);
                }
            }
            let epoch_loss = epoch_loss / n as f64;
            if !epoch_loss.is_finite() {
                return Err(Error::Training("mlp loss diverged".into()));
            }
            net.loss_curve.push(epoch_loss);
            if epoch_loss > best - tolerance {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale >= *patience {
                break;
            }
        }
        Ok(net)
    }
}

fn adam(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64) {
    for i in 0..p.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
        p[i] -= lr * m[i] / (v[i].sqrt() + ADAM_EPS);
    }
}

/// Largest relative difference between backpropagated and central
/// finite-difference gradients of the loss over every parameter.
/// Pairs where both magnitudes are below `1e-6` are compared absolutely.
pub fn gradient_check_network(
    net: &MlpNetwork,
    x: &DMatrix<f64>,
    y: &[f64],
    epsilon: f64,
    hook: GradientHook,
) -> f64 {
    let (_, grads) = net.gradients(x, y, hook);
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|(gw, gb)| gw.iter().chain(gb.iter()).cloned().collect::<Vec<_>>())
        .collect();

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (idx, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(idx);
        *probe.param_mut(idx) = orig + epsilon;
        let up = probe.loss(x, y);
        *probe.param_mut(idx) = orig - epsilon;
        let down = probe.loss(x, y);
        *probe.param_mut(idx) = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

/// Gradient check of a freshly initialized network for an MLP spec.
pub fn gradient_check(spec: &RegressorSpec, x: &DMatrix<f64>, y: &[f64], epsilon: f64) -> Result<f64> {
    let RegressorSpec::Mlp { seed, .. } = spec else {
        return Err(Error::invalid(format!("expected an mlp spec, got {}", spec.name())));
    };
    if y.len() != x.nrows() {
        return Err(Error::invalid("one target per sample required"));
    }
    let net = MlpNetwork::init(&MlpNetwork::sizes_for(spec, x.ncols())?, *seed);
    Ok(gradient_check_network(&net, x, y, epsilon, GradientHook::default()))
}

#[cfg(test)]
mod tests {
    use super::super::{fit, predict, Trained};
    use super::*;

    fn small_spec(hidden: Vec<usize>, epochs: usize) -> RegressorSpec {
        RegressorSpec::Mlp {
            hidden_layers: hidden,
            batch_size: 16,
            epochs,
            learning_rate: 1e-2,
            seed: 3,
            tolerance: 0.0,
            patience: usize::MAX,
        }
    }

    fn toy(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let y = (0..n).map(|i| x[(i, 0)] * 0.5 - x[(i, 1)].powi(2)).collect();
        (x, y)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let (x, y) = toy(8);
        let err = gradient_check(&small_spec(vec![3], 1), &x, &y, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
        let err = gradient_check(&small_spec(vec![5, 4, 3], 1), &x, &y, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_network_has_zero_gradient() {
        let net = MlpNetwork::zeros(&[2, 3, 1]);
        let (x, _) = toy(8);
        let y = vec![0.0; 8];
        let (_, grads) = net.gradients(&x, &y, GradientHook::default());
        assert!(grads.iter().all(|(w, b)| w.iter().chain(b.iter()).all(|&g| g == 0.0)));
        assert_eq!(gradient_check_network(&net, &x, &y, 1e-5, GradientHook::default()), 0.0);
    }

    #[test]
    fn corrupted_backprop_is_detected() {
        let (x, y) = toy(8);
        let net = MlpNetwork::init(&[2, 3, 1], 3);
        let err = gradient_check_network(&net, &x, &y, 1e-5, GradientHook { negate_layer: Some(0) });
        assert!(err > 0.1, "{err}");
    }

    #[test]
    fn init_is_seed_deterministic() {
        assert_eq!(MlpNetwork::init(&[1, 4, 1], 9), MlpNetwork::init(&[1, 4, 1], 9));
        assert_ne!(MlpNetwork::init(&[1, 4, 1], 9), MlpNetwork::init(&[1, 4, 1], 10));
        assert_eq!(MlpNetwork::init(&[3, 20, 20, 1], 0).parameter_count(), 3 * 20 + 20 + 400 + 20 + 21);
    }

    #[test]
    fn training_reduces_loss() {
        let (x, y) = toy(64);
        let spec = small_spec(vec![8, 8], 100);
        let m = fit(&spec, &x, &y).unwrap();
        let Trained::Mlp(net) = &m.state else { unreachable!() };
        let xs = m.features.apply(&x);
        let (mean, scale) = m.target;
        let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
        let initial = MlpNetwork::init(&[2, 8, 8, 1], 3).loss(&xs, &ys);
        assert!(net.loss(&xs, &ys) < initial);
        assert_eq!(net.loss_curve.len(), 100);
        // same seed, same model
        assert_eq!(fit(&spec, &x, &y).unwrap(), m);
        assert!(predict(&m, &x).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn early_stopping_caps_epochs() {
        let (x, y) = toy(64);
        let spec = RegressorSpec::Mlp {
            hidden_layers: vec![4],
            batch_size: 64,
            epochs: 500,
            learning_rate: 1e-3,
            seed: 1,
            tolerance: 10.0,
            patience: 3,
        };
        let m = fit(&spec, &x, &y).unwrap();
        let Trained::Mlp(net) = &m.state else { unreachable!() };
        // first epoch sets the best loss, the next three cannot beat it by 10
        assert_eq!(net.loss_curve.len(), 4);
    }
}
