//! CART decision trees with Gini impurity.
//!
//! Split candidates are the midpoints between consecutive distinct values of a
//! feature. Ties between equally good splits go to the lower feature index,
//! then the lower threshold. Split quality is computed from class counts only,
//! so any per-feature order-preserving rescaling of the inputs yields the same
//! tree shape.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, NUM_FEATURES};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if self.min_samples_split < 2 {
            return Err(ModelError::InvalidSpec(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(ModelError::InvalidSpec("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Node<T> {
    Leaf {
        counts: Vec<u32>,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionTree<T> {
    nodes: Vec<Node<T>>,
    n_classes: usize,
}

/// How candidate features are chosen at each node.
pub(crate) enum FeatureSampling<'a> {
    All,
    /// Draw `count` features per node; fall back to the remaining ones, in
    /// draw order, when none of the drawn features separates the node.
    Random {
        count: usize,
        rng: &'a mut SeededRng,
    },
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    score: f64,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn fit(x: &[FeatureVector<T>], y: &[usize], n_classes: usize, params: &TreeParams) -> Self {
        let indices: Vec<usize> = (0..x.len()).collect();
        Self::fit_on(x, y, &indices, n_classes, params, FeatureSampling::All)
    }

    /// Grows a tree on `indices` (which may contain repeats, as bootstrap samples do).
    pub(crate) fn fit_on(
        x: &[FeatureVector<T>],
        y: &[usize],
        indices: &[usize],
        n_classes: usize,
        params: &TreeParams,
        mut sampling: FeatureSampling<'_>,
    ) -> Self {
        let mut nodes: Vec<Node<T>> = Vec::new();
        // (node slot, samples, depth); left children are finished before right ones.
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, indices.to_vec(), 0)];
        nodes.push(Node::Leaf { counts: Vec::new() });

        while let Some((slot, members, depth)) = stack.pop() {
            let counts = class_counts(y, &members, n_classes);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || depth_capped || members.len() < params.min_samples_split {
                None
            } else {
                choose_split(x, y, &members, n_classes, &mut sampling)
            };
            match split {
                None => nodes[slot] = Node::Leaf { counts },
                Some(best) => {
                    let (left, right): (Vec<usize>, Vec<usize>) = members
                        .iter()
                        .partition(|&&i| x[i][best.feature] <= best.threshold);
                    let l = nodes.len();
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    let r = nodes.len();
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes[slot] = Node::Split {
                        feature: best.feature,
                        threshold: best.threshold,
                        left: l,
                        right: r,
                    };
                    stack.push((r, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
            }
        }
        Self { nodes, n_classes }
    }

    fn leaf_counts(&self, x: &FeatureVector<T>) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Class frequencies of the leaf `x` lands in.
    pub fn scores(&self, x: &FeatureVector<T>) -> Vec<T> {
        let counts = self.leaf_counts(x);
        let total: u32 = counts.iter().sum();
        counts
            .iter()
            .map(|&c| T::of_usize(c as usize) / T::of_usize(total.max(1) as usize))
            .collect()
    }

    /// Majority class of the leaf `x` lands in; ties go to the lowest class index.
    pub fn predict_class(&self, x: &FeatureVector<T>) -> usize {
        let counts = self.leaf_counts(x);
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        best
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn class_counts(y: &[usize], members: &[usize], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &i in members {
        counts[y[i]] += 1;
    }
    counts
}

fn choose_split<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    members: &[usize],
    n_classes: usize,
    sampling: &mut FeatureSampling<'_>,
) -> Option<BestSplit<T>> {
    match sampling {
        FeatureSampling::All => best_over(x, y, members, n_classes, 0..NUM_FEATURES),
        FeatureSampling::Random { count, rng } => {
            let order = rng.choose_distinct(NUM_FEATURES, NUM_FEATURES);
            let (drawn, rest) = order.split_at((*count).min(NUM_FEATURES));
            let mut drawn = drawn.to_vec();
            drawn.sort_unstable();
            best_over(x, y, members, n_classes, drawn.into_iter()).or_else(|| {
                rest.iter()
                    .find_map(|&f| best_over(x, y, members, n_classes, std::iter::once(f)))
            })
        }
    }
}

/// Best midpoint split over `features` (visited in the given order), maximising
/// `sum_c L_c^2 / |L| + sum_c R_c^2 / |R|`, which is equivalent to minimising
/// the size-weighted Gini impurity of the children.
fn best_over<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    members: &[usize],
    n_classes: usize,
    features: impl Iterator<Item = usize>,
) -> Option<BestSplit<T>> {
    let total = class_counts(y, members, n_classes);
    let n = members.len();
    let mut best: Option<BestSplit<T>> = None;
    let mut order = members.to_vec();

    for f in features {
        order.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features"));
        let mut left = vec![0u64; n_classes];
        let mut left_sq = 0u64;
        let mut right_sq: u64 = total.iter().map(|&c| (c as u64) * (c as u64)).sum();
        for pos in 0..n - 1 {
            let c = y[order[pos]];
            let l = left[c];
            let r = total[c] as u64 - l;
            left_sq += 2 * l + 1;
            right_sq -= 2 * r - 1;
            left[c] = l + 1;

            let lo = x[order[pos]][f];
            let hi = x[order[pos + 1]][f];
            if !(lo < hi) {
                continue;
            }
            let n_left = (pos + 1) as f64;
            let score = left_sq as f64 / n_left + right_sq as f64 / (n as f64 - n_left);
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mut threshold = (lo + hi) / T::of(2.0);
                if !(threshold < hi) {
                    threshold = lo;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}
