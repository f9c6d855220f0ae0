//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::scalar::Scalar;

use super::{softmax, ModelError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    /// Added to every variance, as a fraction of the largest per-feature
    /// variance of the whole training set.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self {
            var_smoothing: 1e-9,
        }
    }
}

impl NaiveBayesParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if !(self.var_smoothing >= 0.0 && self.var_smoothing.is_finite()) {
            return Err(ModelError::InvalidSpec(
                "var_smoothing must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GaussianNb<T> {
    pub means: Vec<FeatureVector<T>>,
    /// Smoothed per-class variances.
    pub variances: Vec<FeatureVector<T>>,
    pub priors: Vec<T>,
    pub epsilon: T,
}

fn mean_and_variance<T: Scalar>(
    rows: &[&FeatureVector<T>],
) -> (FeatureVector<T>, FeatureVector<T>) {
    let n = T::of_usize(rows.len());
    let mut mean = [T::zero(); NUM_FEATURES];
    for r in rows {
        for f in 0..NUM_FEATURES {
            mean[f] += r[f];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [T::zero(); NUM_FEATURES];
    for r in rows {
        for f in 0..NUM_FEATURES {
            let d = r[f] - mean[f];
            var[f] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

impl<T: Scalar> GaussianNb<T> {
    pub fn fit(
        x: &[FeatureVector<T>],
        y: &[usize],
        n_classes: usize,
        params: &NaiveBayesParams,
    ) -> Self {
        let all: Vec<&FeatureVector<T>> = x.iter().collect();
        let (_, global_var) = mean_and_variance(&all);
        let largest = global_var.iter().fold(T::zero(), |a, &b| a.max(b));
        let epsilon = T::of(params.var_smoothing) * largest;

        let mut means = Vec::with_capacity(n_classes);
        let mut variances = Vec::with_capacity(n_classes);
        let mut priors = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let rows: Vec<&FeatureVector<T>> = x
                .iter()
                .zip(y)
                .filter(|(_, &t)| t == c)
                .map(|(r, _)| r)
                .collect();
            if rows.is_empty() {
                means.push([T::zero(); NUM_FEATURES]);
                variances.push([T::one(); NUM_FEATURES]);
                priors.push(T::zero());
                continue;
            }
            let (m, mut v) = mean_and_variance(&rows);
            v.iter_mut().for_each(|s| *s += epsilon);
            means.push(m);
            variances.push(v);
            priors.push(T::of_usize(rows.len()) / T::of_usize(x.len()));
        }
        Self {
            means,
            variances,
            priors,
            epsilon,
        }
    }

    /// `log P(c) + sum_f log N(x_f; mean_cf, var_cf)` for every class.
    pub fn joint_log_likelihood(&self, x: &FeatureVector<T>) -> Vec<T> {
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        let half = T::of(0.5);
        (0..self.priors.len())
            .map(|c| {
                let mut ll = self.priors[c].ln();
                for f in 0..NUM_FEATURES {
                    let var = self.variances[c][f];
                    let d = x[f] - self.means[c][f];
                    ll -= half * (two_pi * var).ln() + d * d / (var + var);
                }
                ll
            })
            .collect()
    }

    /// Class posteriors.
    pub fn scores(&self, x: &FeatureVector<T>) -> Vec<T> {
        softmax(&self.joint_log_likelihood(x))
    }
}
