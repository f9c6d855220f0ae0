//! Single-hidden-layer perceptron with ReLU activations and a softmax output.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

use super::{softmax, ModelError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescent,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: Optimizer,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 0.01,
            epochs: 300,
            optimizer: Optimizer::adam(),
        }
    }
}

impl MlpParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.epochs == 0 {
            return Err(ModelError::InvalidSpec(
                "hidden and epochs must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidSpec(
                "learning_rate must be finite and > 0".into(),
            ));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !unit(beta1) || !unit(beta2) || !(epsilon > 0.0) {
                return Err(ModelError::InvalidSpec(
                    "Adam needs betas in [0,1) and epsilon > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Weights are row-major: `w1[h * 7 + f]`, `w2[c * hidden + h]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    hidden: usize,
    n_classes: usize,
    w1: Vec<T>,
    b1: Vec<T>,
    w2: Vec<T>,
    b2: Vec<T>,
}

struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    fn init(hidden: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let mut uniform = |fan_in: usize, fan_out: usize, len: usize| -> Vec<T> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..len)
                .map(|_| T::of(rng.uniform(-limit, limit)))
                .collect()
        };
        let w1 = uniform(NUM_FEATURES, hidden, hidden * NUM_FEATURES);
        let w2 = uniform(hidden, n_classes, n_classes * hidden);
        Self {
            hidden,
            n_classes,
            w1,
            b1: vec![T::zero(); hidden],
            w2,
            b2: vec![T::zero(); n_classes],
        }
    }

    fn hidden_activations(&self, x: &FeatureVector<T>) -> Vec<T> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * NUM_FEATURES..(h + 1) * NUM_FEATURES];
                let z: T = row.iter().zip(x).map(|(w, v)| *w * *v).sum::<T>() + self.b1[h];
                z.max(T::zero())
            })
            .collect()
    }

    fn logits(&self, a: &[T]) -> Vec<T> {
        (0..self.n_classes)
            .map(|c| {
                let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
                row.iter().zip(a).map(|(w, v)| *w * *v).sum::<T>() + self.b2[c]
            })
            .collect()
    }

    pub fn scores(&self, x: &FeatureVector<T>) -> Vec<T> {
        softmax(&self.logits(&self.hidden_activations(x)))
    }

    /// Full-batch training on mean cross-entropy. Returns the model and the
    /// loss before each epoch.
    pub fn fit(
        x: &[FeatureVector<T>],
        y: &[usize],
        n_classes: usize,
        params: &MlpParams,
        seed: u64,
    ) -> (Self, Vec<T>) {
        let mut net = Self::init(params.hidden, n_classes, seed);
        let n = T::of_usize(x.len());
        let lr = T::of(params.learning_rate);
        let hidden = params.hidden;
        let sizes = [net.w1.len(), net.b1.len(), net.w2.len(), net.b2.len()];
        let mut adam: Vec<AdamState<T>> = sizes
            .iter()
            .map(|&len| AdamState {
                m: vec![T::zero(); len],
                v: vec![T::zero(); len],
            })
            .collect();
        let mut history = Vec::with_capacity(params.epochs);

        for epoch in 0..params.epochs {
            let mut g_w1 = vec![T::zero(); sizes[0]];
            let mut g_b1 = vec![T::zero(); sizes[1]];
            let mut g_w2 = vec![T::zero(); sizes[2]];
            let mut g_b2 = vec![T::zero(); sizes[3]];
            let mut loss = T::zero();
            let mut delta_hidden = vec![T::zero(); hidden];

            for (xi, &yi) in x.iter().zip(y) {
                let a = net.hidden_activations(xi);
                let mut p = softmax(&net.logits(&a));
                loss -= p[yi].max(T::min_positive_value()).ln();
                p[yi] -= T::one();
                delta_hidden.iter_mut().for_each(|d| *d = T::zero());
                for c in 0..n_classes {
                    let g = p[c];
                    g_b2[c] += g;
                    let row = c * hidden;
                    for h in 0..hidden {
                        g_w2[row + h] += g * a[h];
                        delta_hidden[h] += g * net.w2[row + h];
                    }
                }
                for h in 0..hidden {
                    if a[h] > T::zero() {
                        let d = delta_hidden[h];
                        g_b1[h] += d;
                        let row = h * NUM_FEATURES;
                        for f in 0..NUM_FEATURES {
                            g_w1[row + f] += d * xi[f];
                        }
                    }
                }
            }
            history.push(loss / n);

            let step = epoch + 1;
            let params_and_grads: [(&mut Vec<T>, Vec<T>); 4] = [
                (&mut net.w1, g_w1),
                (&mut net.b1, g_b1),
                (&mut net.w2, g_w2),
                (&mut net.b2, g_b2),
            ];
            for ((weights, grad), state) in params_and_grads.into_iter().zip(adam.iter_mut()) {
                match params.optimizer {
                    Optimizer::GradientDescent => {
                        for (w, g) in weights.iter_mut().zip(&grad) {
                            *w -= lr * *g / n;
                        }
                    }
                    Optimizer::Adam {
                        beta1,
                        beta2,
                        epsilon,
                    } => {
                        let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(epsilon));
                        let c1 = T::one() - T::of(beta1.powi(step as i32));
                        let c2 = T::one() - T::of(beta2.powi(step as i32));
                        for i in 0..weights.len() {
                            let g = grad[i] / n;
                            state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
                            state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
                            let m_hat = state.m[i] / c1;
                            let v_hat = state.v[i] / c2;
                            weights[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                        }
                    }
                }
            }
        }
        (net, history)
    }
}
