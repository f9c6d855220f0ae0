//! k-nearest neighbours with Euclidean distance.
//!
//! Neighbours are ordered by distance, then by training position. A class's
//! score is its share of the `k` votes; equal vote counts are ranked by the
//! smaller summed neighbour distance, then by class index.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureVector;
use crate::scalar::Scalar;

use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl KnnParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.k == 0 {
            return Err(ModelError::InvalidSpec("k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Knn<T> {
    points: Vec<FeatureVector<T>>,
    targets: Vec<usize>,
    k: usize,
    n_classes: usize,
}

/// Per-class vote shares and the summed distance of the voting neighbours.
pub struct Neighbourhood<T> {
    pub votes: Vec<usize>,
    pub distance_sums: Vec<T>,
    pub k: usize,
}

impl<T: Scalar> Knn<T> {
    /// Stores the training set. `k` larger than the training set is clamped.
    pub fn fit(x: &[FeatureVector<T>], y: &[usize], n_classes: usize, params: &KnnParams) -> Self {
        Self {
            points: x.to_vec(),
            targets: y.to_vec(),
            k: params.k.min(x.len()),
            n_classes,
        }
    }

    pub fn neighbourhood(&self, x: &FeatureVector<T>) -> Neighbourhood<T> {
        let mut dist: Vec<(T, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let sq: T = p.iter().zip(x).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                (sq.sqrt(), i)
            })
            .collect();
        let by_distance = |a: &(T, usize), b: &(T, usize)| {
            a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1))
        };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
            dist.truncate(self.k);
        }
        dist.sort_by(by_distance);

        let mut votes = vec![0usize; self.n_classes];
        let mut distance_sums = vec![T::zero(); self.n_classes];
        for &(d, i) in &dist {
            let c = self.targets[i];
            votes[c] += 1;
            distance_sums[c] += d;
        }
        Neighbourhood {
            votes,
            distance_sums,
            k: self.k,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }
}
