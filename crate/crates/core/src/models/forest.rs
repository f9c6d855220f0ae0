//! Bagged CART ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

use super::tree::{DecisionTree, FeatureSampling, TreeParams};
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(7)) = 2`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self) -> usize {
        self.max_features
            .unwrap_or_else(|| (NUM_FEATURES as f64).sqrt().floor() as usize)
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::InvalidSpec("n_trees must be >= 1".into()));
        }
        if !(1..=NUM_FEATURES).contains(&self.features_per_split()) {
            return Err(ModelError::InvalidSpec(format!(
                "max_features must lie in 1..={NUM_FEATURES}"
            )));
        }
        self.tree.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RandomForest<T> {
    trees: Vec<DecisionTree<T>>,
    n_classes: usize,
}

impl<T: Scalar> RandomForest<T> {
    /// Tree `i` draws its bootstrap sample and feature subsets from its own
    /// generator seeded with `seed + i`, so the result does not depend on how
    /// trees are scheduled across threads.
    pub fn fit(
        x: &[FeatureVector<T>],
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Self {
        let n = x.len();
        let per_split = params.features_per_split();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = SeededRng::new(seed.wrapping_add(t as u64));
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit_on(
                    x,
                    y,
                    &indices,
                    n_classes,
                    &params.tree,
                    FeatureSampling::Random {
                        count: per_split,
                        rng: &mut rng,
                    },
                )
            })
            .collect();
        Self { trees, n_classes }
    }

    /// Number of trees voting for each class.
    pub fn votes(&self, x: &FeatureVector<T>) -> Vec<usize> {
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_class(x)] += 1;
        }
        votes
    }

    /// Vote fractions.
    pub fn scores(&self, x: &FeatureVector<T>) -> Vec<T> {
        let total = T::of_usize(self.trees.len());
        self.votes(x)
            .into_iter()
            .map(|v| T::of_usize(v) / total)
            .collect()
    }

    pub fn trees(&self) -> &[DecisionTree<T>] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<FeatureVector<f64>>, Vec<usize>) {
        let mut rng = SeededRng::new(9);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..3 {
            for _ in 0..30 {
                let mut v = [0.0; NUM_FEATURES];
                for f in v.iter_mut() {
                    *f = c as f64 * 3.0 + rng.unit();
                }
                x.push(v);
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (x, y) = blobs();
        let params = ForestParams {
            n_trees: 15,
            ..ForestParams::default()
        };
        let a = RandomForest::fit(&x, &y, 3, &params, 42);
        let b = RandomForest::fit(&x, &y, 3, &params, 42);
        assert_eq!(a, b);
        let c = RandomForest::fit(&x, &y, 3, &params, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn tree_i_uses_seed_plus_i() {
        let (x, y) = blobs();
        let params = ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        };
        let a = RandomForest::fit(&x, &y, 3, &params, 100);
        let b = RandomForest::fit(&x, &y, 3, &params, 102);
        assert_eq!(a.trees()[2..], b.trees()[..3]);
    }

    #[test]
    fn votes_sum_to_tree_count() {
        let (x, y) = blobs();
        let f = RandomForest::fit(
            &x,
            &y,
            3,
            &ForestParams {
                n_trees: 10,
                ..Default::default()
            },
            1,
        );
        assert_eq!(f.votes(&x[0]).iter().sum::<usize>(), 10);
        let s: f64 = f.scores(&x[40]).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(f.votes(&x[45])[1], 10);
    }

    #[test]
    fn default_draws_two_features() {
        assert_eq!(ForestParams::default().features_per_split(), 2);
        assert!(ForestParams {
            n_trees: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ForestParams {
            max_features: Some(8),
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
