//! Two-logit classifiers over flat parameter vectors, trained with
//! mini-batch Adam on class-weighted softmax cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HyperParams, ModelError};

/// Logit order is `[other, misinformation]`, matching `BinaryLabel::index`.
pub trait Classifier: Send + Sync {
    fn kind(&self) -> &str;
    fn input_dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, x: &[f64]) -> [f64; 2];
    /// Adds d(loss)/d(params) for one example to `grad`, given d(loss)/d(logits).
    fn backward(&self, x: &[f64], dlogits: [f64; 2], grad: &mut [f64]);
    /// Extra shape information needed to rebuild the model from its parameters.
    fn shape(&self) -> Vec<u64> {
        vec![self.input_dim() as u64]
    }
}

/// Softmax probability of the positive class.
pub fn positive_probability(logits: [f64; 2]) -> f64 {
    let z = logits[1] - logits[0];
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    [logits[0] - lse, logits[1] - lse]
}

/// Multinomial logistic regression: `logits = W x + b`, `W` is 2 x d.
pub struct LinearClassifier {
    dim: usize,
    params: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params: Vec<f64> = (0..2 * dim).map(|_| rng.gen_range(-0.01..0.01)).collect();
        params.extend([0.0, 0.0]);
        Self { dim, params }
    }

    pub fn from_params(dim: usize, params: Vec<f64>) -> Result<Self, ModelError> {
        if params.len() != 2 * dim + 2 {
            return Err(ModelError::CorruptBlob(format!("linear: {} params for dim {dim}", params.len())));
        }
        Ok(Self { dim, params })
    }
}

impl Classifier for LinearClassifier {
    fn kind(&self) -> &str {
        "linear"
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &[f64]) -> [f64; 2] {
        let d = self.dim;
        let (w, b) = self.params.split_at(2 * d);
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        [dot(&w[..d]) + b[0], dot(&w[d..]) + b[1]]
    }

    fn backward(&self, x: &[f64], dlogits: [f64; 2], grad: &mut [f64]) {
        let d = self.dim;
        for (k, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (gw, &xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *gw += g * xi;
            }
            grad[2 * d + k] += g;
        }
    }
}

/// One ReLU hidden layer: `logits = W2 relu(W1 x + b1) + b2`.
pub struct MlpClassifier {
    dim: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl MlpClassifier {
    fn len(dim: usize, hidden: usize) -> usize {
        hidden * dim + hidden + 2 * hidden + 2
    }

    pub fn new(dim: usize, hidden: usize, seed: u64) -> Self {
        let hidden = hidden.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / (dim + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 2) as f64).sqrt();
        let mut params = Vec::with_capacity(Self::len(dim, hidden));
        params.extend((0..hidden * dim).map(|_| rng.gen_range(-a1..a1)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        params.extend((0..2 * hidden).map(|_| rng.gen_range(-a2..a2)));
        params.extend([0.0, 0.0]);
        Self { dim, hidden, params }
    }

    pub fn from_params(dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self, ModelError> {
        if params.len() != Self::len(dim, hidden) {
            return Err(ModelError::CorruptBlob(format!("mlp: {} params for {dim}x{hidden}", params.len())));
        }
        Ok(Self { dim, hidden, params })
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let (d, h) = (self.dim, self.hidden);
        let w1 = &self.params[..h * d];
        let b1 = &self.params[h * d..h * d + h];
        (0..h)
            .map(|j| {
                let z = w1[j * d..(j + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[j];
                z.max(0.0)
            })
            .collect()
    }
}

impl Classifier for MlpClassifier {
    fn kind(&self) -> &str {
        "mlp"
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn shape(&self) -> Vec<u64> {
        vec![self.dim as u64, self.hidden as u64]
    }

    fn forward(&self, x: &[f64]) -> [f64; 2] {
        let (d, h) = (self.dim, self.hidden);
        let a = self.hidden_activations(x);
        let w2 = &self.params[h * d + h..h * d + 3 * h];
        let b2 = &self.params[h * d + 3 * h..];
        let dot = |row: &[f64]| row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>();
        [dot(&w2[..h]) + b2[0], dot(&w2[h..]) + b2[1]]
    }

    fn backward(&self, x: &[f64], dlogits: [f64; 2], grad: &mut [f64]) {
        let (d, h) = (self.dim, self.hidden);
        let a = self.hidden_activations(x);
        let w2_off = h * d + h;
        let b2_off = h * d + 3 * h;
        let mut da = vec![0.0; h];
        for k in 0..2 {
            let g = dlogits[k];
            for j in 0..h {
                grad[w2_off + k * h + j] += g * a[j];
                da[j] += g * self.params[w2_off + k * h + j];
            }
            grad[b2_off + k] += g;
        }
        for j in 0..h {
            if a[j] <= 0.0 {
                continue;
            }
            let g = da[j];
            for (gw, &xi) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                *gw += g * xi;
            }
            grad[h * d + j] += g;
        }
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Inverse-frequency weights `n / (2 n_c)`, or `[1, 1]` when disabled.
pub fn class_weights(y: &[usize], enabled: bool) -> [f64; 2] {
    if !enabled {
        return [1.0, 1.0];
    }
    let n = y.len() as f64;
    let n1 = y.iter().filter(|&&c| c == 1).count() as f64;
    let n0 = n - n1;
    [n / (2.0 * n0.max(1.0)), n / (2.0 * n1.max(1.0))]
}

/// Trains in place and returns the per-epoch mean weighted loss. Parameters
/// are restored to the lowest-loss epoch when training ends.
pub fn fit(model: &mut dyn Classifier, x: &[Vec<f64>], y: &[usize], hp: &HyperParams, seed: u64) -> Result<Vec<f64>, ModelError> {
    let n = x.len();
    let weights = class_weights(y, hp.class_weighting);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED_5EED_5EED);
    let mut adam = Adam::new(model.params().len(), hp.learning_rate);
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(hp.epochs);
    let mut best = (f64::INFINITY, model.params().to_vec());
    let mut stale = 0usize;

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hp.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let logits = model.forward(&x[i]);
                let ls = log_softmax(logits);
                let w = weights[y[i]];
                total += -w * ls[y[i]];
                let p = [ls[0].exp(), ls[1].exp()];
                let mut dl = [w * p[0], w * p[1]];
                dl[y[i]] -= w;
                model.backward(&x[i], dl, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grad);
        }
        let loss = total / n as f64;
        if !loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(ModelError::NonFiniteLoss { epoch: epoch + 1 });
        }
        history.push(loss);
        if loss < best.0 - 1e-12 {
            best = (loss, model.params().to_vec());
            stale = 0;
        } else {
            stale += 1;
            if hp.early_stop_patience.is_some_and(|p| stale >= p) {
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best.1);
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_difference_check(model: &mut dyn Classifier, x: &[f64]) {
        let dl = [0.3, -0.7];
        let mut grad = vec![0.0; model.params().len()];
        model.backward(x, dl, &mut grad);
        let eps = 1e-6;
        for i in 0..model.params().len() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + eps;
            let up = model.forward(x);
            model.params_mut()[i] = orig - eps;
            let down = model.forward(x);
            model.params_mut()[i] = orig;
            let numeric = (dl[0] * (up[0] - down[0]) + dl[1] * (up[1] - down[1])) / (2.0 * eps);
            assert!((numeric - grad[i]).abs() < 1e-6, "param {i}: {numeric} vs {}", grad[i]);
        }
    }

    #[test]
    fn linear_gradient_matches_finite_differences() {
        let mut m = LinearClassifier::new(4, 3);
        finite_difference_check(&mut m, &[0.5, -1.0, 2.0, 0.0]);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut m = MlpClassifier::new(3, 5, 9);
        finite_difference_check(&mut m, &[0.4, -0.2, 1.3]);
    }

    #[test]
    fn probability_stable_and_bounded() {
        assert_eq!(positive_probability([0.0, 0.0]), 0.5);
        assert!(positive_probability([1000.0, -1000.0]) >= 0.0);
        assert!(positive_probability([-1000.0, 1000.0]) <= 1.0);
        assert!((positive_probability([0.0, 2.0]) - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn weights_inverse_frequency() {
        let w = class_weights(&[1, 1, 1, 0], true);
        assert!((w[0] - 2.0).abs() < 1e-12);
        assert!((w[1] - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(class_weights(&[1, 0], false), [1.0, 1.0]);
    }
}
