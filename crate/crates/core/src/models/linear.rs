//! Linear classifiers: multinomial logistic regression and one-vs-rest linear SVM.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

use super::{softmax, ModelError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 2.0,
            epochs: 3000,
            l2: 1e-4,
        }
    }
}

impl LogisticParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        positive("learning_rate", self.learning_rate)?;
        non_negative("l2", self.l2)?;
        if self.epochs == 0 {
            return Err(ModelError::InvalidSpec("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    /// Initial step size; step `t` uses `eta0 / (1 + eta0 * lambda * t)`.
    pub eta0: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 200,
            eta0: 1.0,
        }
    }
}

impl SvmParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        positive("lambda", self.lambda)?;
        positive("eta0", self.eta0)?;
        if self.epochs == 0 {
            return Err(ModelError::InvalidSpec("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidSpec(format!(
            "{name} must be finite and > 0"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), ModelError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidSpec(format!(
            "{name} must be finite and >= 0"
        )))
    }
}

/// One weight row and bias per class; scores are a softmax over `w_c . x + b_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub weights: Vec<FeatureVector<T>>,
    pub bias: Vec<T>,
}

fn dot<T: Scalar>(w: &FeatureVector<T>, x: &FeatureVector<T>) -> T {
    w.iter().zip(x).map(|(a, b)| *a * *b).sum()
}

impl<T: Scalar> LinearModel<T> {
    fn zeros(n_classes: usize) -> Self {
        Self {
            weights: vec![[T::zero(); NUM_FEATURES]; n_classes],
            bias: vec![T::zero(); n_classes],
        }
    }

    pub fn margins(&self, x: &FeatureVector<T>) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| dot(w, x) + b)
            .collect()
    }

    pub fn scores(&self, x: &FeatureVector<T>) -> Vec<T> {
        softmax(&self.margins(x))
    }

    /// Multinomial logistic regression by full-batch gradient descent from
    /// zero weights, minimising mean cross-entropy plus `l2/2 * |W|^2` (bias
    /// unpenalised). Returns the model and the objective before each epoch.
    pub fn fit_logistic(
        x: &[FeatureVector<T>],
        y: &[usize],
        n_classes: usize,
        params: &LogisticParams,
    ) -> (Self, Vec<T>) {
        let mut model = Self::zeros(n_classes);
        let n = T::of_usize(x.len());
        let lr = T::of(params.learning_rate);
        let l2 = T::of(params.l2);
        let mut history = Vec::with_capacity(params.epochs);

        for _ in 0..params.epochs {
            let mut grad_w = vec![[T::zero(); NUM_FEATURES]; n_classes];
            let mut grad_b = vec![T::zero(); n_classes];
            let mut loss = T::zero();
            for (xi, &yi) in x.iter().zip(y) {
                let p = model.scores(xi);
                loss -= p[yi].max(T::min_positive_value()).ln();
                for c in 0..n_classes {
                    let g = if c == yi { p[c] - T::one() } else { p[c] };
                    for f in 0..NUM_FEATURES {
                        grad_w[c][f] += g * xi[f];
                    }
                    grad_b[c] += g;
                }
            }
            let penalty: T = model
                .weights
                .iter()
                .flat_map(|w| w.iter())
                .map(|&w| w * w)
                .sum();
            history.push(loss / n + l2 * penalty / T::of(2.0));
            for c in 0..n_classes {
                for f in 0..NUM_FEATURES {
                    let g = grad_w[c][f] / n + l2 * model.weights[c][f];
                    model.weights[c][f] -= lr * g;
                }
                model.bias[c] -= lr * grad_b[c] / n;
            }
        }
        (model, history)
    }

    /// One-vs-rest linear SVM: per class, stochastic subgradient descent on
    /// `lambda/2 * |w|^2 + mean hinge`, visiting samples in a per-epoch
    /// shuffled order drawn from `seed` (the same order for every class).
    pub fn fit_svm(
        x: &[FeatureVector<T>],
        y: &[usize],
        n_classes: usize,
        params: &SvmParams,
        seed: u64,
    ) -> Self {
        let lambda = T::of(params.lambda);
        let eta0 = T::of(params.eta0);
        let rows: Vec<(FeatureVector<T>, T)> = (0..n_classes)
            .into_par_iter()
            .map(|c| {
                let mut rng = SeededRng::new(seed);
                let mut order: Vec<usize> = (0..x.len()).collect();
                let mut w = [T::zero(); NUM_FEATURES];
                let mut b = T::zero();
                let mut t = T::zero();
                for _ in 0..params.epochs {
                    rng.shuffle(&mut order);
                    for &i in &order {
                        let target = if y[i] == c { T::one() } else { -T::one() };
                        let eta = eta0 / (T::one() + eta0 * lambda * t);
                        let violated = target * (dot(&w, &x[i]) + b) < T::one();
                        let shrink = T::one() - eta * lambda;
                        for f in 0..NUM_FEATURES {
                            w[f] *= shrink;
                            if violated {
                                w[f] += eta * target * x[i][f];
                            }
                        }
                        if violated {
                            b += eta * target;
                        }
                        t += T::one();
                    }
                }
                (w, b)
            })
            .collect();
        let (weights, bias) = rows.into_iter().unzip();
        Self { weights, bias }
    }
}
