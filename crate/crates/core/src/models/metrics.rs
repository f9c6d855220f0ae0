use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::scalar::Scalar;

use super::{ModelError, TrainedModel};

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_pairs(n_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(n_classes);
        for (t, p) in pairs {
            m.counts[t][p] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Sum of the diagonal over the sum of all cells, as a percentage.
    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.counts.len()).map(|c| self.counts[c][c]).sum();
        100.0 * diag as f64 / self.total() as f64
    }

    /// Macro precision, recall and F1 (percentages) over classes that occur
    /// in the true labels. A class never predicted has precision 0.
    pub fn macro_scores(&self) -> (f64, f64, f64) {
        let n = self.counts.len();
        let (mut p_sum, mut r_sum, mut f_sum, mut classes) = (0.0, 0.0, 0.0, 0usize);
        for c in 0..n {
            let support: u64 = self.counts[c].iter().sum();
            if support == 0 {
                continue;
            }
            let tp = self.counts[c][c] as f64;
            let predicted: u64 = (0..n).map(|t| self.counts[t][c]).sum();
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = tp / support as f64;
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            p_sum += precision;
            r_sum += recall;
            f_sum += f1;
            classes += 1;
        }
        let k = classes.max(1) as f64;
        (100.0 * p_sum / k, 100.0 * r_sum / k, 100.0 * f_sum / k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: String,
    /// Seconds, millisecond resolution.
    pub training_time: f64,
    pub testing_time: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn millis(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

/// Scores a fitted model on a held-out set.
pub fn evaluate<T: Scalar>(
    m: &TrainedModel<T>,
    test: &Dataset<T>,
) -> Result<EvalReport, ModelError> {
    if test.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let truth = test
        .samples()
        .iter()
        .map(|s| {
            m.labels
                .binary_search(&s.label)
                .map_err(|_| ModelError::UnknownLabel(s.label.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let started = Instant::now();
    let predicted: Vec<usize> = test
        .samples()
        .par_iter()
        .map(|s| m.predict_scaled(&m.scaler.apply(&s.reading)))
        .collect();
    let testing_time = started.elapsed().as_secs_f64();

    let cm = ConfusionMatrix::from_pairs(m.n_classes(), truth.into_iter().zip(predicted));
    let (precision, recall, f1) = cm.macro_scores();
    Ok(EvalReport {
        algorithm: m.algorithm().display_name().to_string(),
        training_time: millis(m.training_time),
        testing_time: millis(testing_time),
        accuracy: cm.accuracy(),
        precision,
        recall,
        f1,
    })
}
