//! The seven classifiers, their common fit/predict surface, evaluation and
//! benchmarking, and model files.

pub mod forest;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod naive_bayes;
pub mod tree;

mod benchmark;
mod metrics;
mod persist;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, FeatureVector, MinMaxScaler, SensorReading};
use crate::scalar::Scalar;

pub use benchmark::{benchmark_suite, AccuracyPoint, BenchmarkReport, MetricRow, TimingRow};
pub use forest::{ForestParams, RandomForest};
pub use knn::{Knn, KnnParams};
pub use linear::{LinearModel, LogisticParams, SvmParams};
pub use metrics::{evaluate, ConfusionMatrix, EvalReport};
pub use mlp::{Mlp, MlpParams, Optimizer};
pub use naive_bayes::{GaussianNb, NaiveBayesParams};
pub use persist::{load_model, save_model, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use tree::{DecisionTree, TreeParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
    #[error("input error: feature `{0}` is not finite")]
    NonFiniteInput(&'static str),
    #[error("k = {k} out of range 1..={classes}")]
    KOutOfRange { k: usize, classes: usize },
    #[error("label `{0}` is not known to the model")]
    UnknownLabel(String),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("model format error: {0}")]
    Format(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("{algorithm}: {source}")]
    Algorithm {
        algorithm: &'static str,
        #[source]
        source: Box<ModelError>,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "DT")]
    DecisionTree,
    #[serde(rename = "NB")]
    NaiveBayes,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "LR")]
    LogisticRegression,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "NN")]
    NeuralNet,
}

impl Algorithm {
    /// All seven, in benchmark table order.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::DecisionTree,
        Algorithm::NaiveBayes,
        Algorithm::Svm,
        Algorithm::LogisticRegression,
        Algorithm::RandomForest,
        Algorithm::Knn,
        Algorithm::NeuralNet,
    ];

    pub fn abbreviation(self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "DT",
            Algorithm::NaiveBayes => "NB",
            Algorithm::Svm => "SVM",
            Algorithm::LogisticRegression => "LR",
            Algorithm::RandomForest => "RF",
            Algorithm::Knn => "KNN",
            Algorithm::NeuralNet => "NN",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "Decision Tree",
            Algorithm::NaiveBayes => "Gaussian Naive Bayes",
            Algorithm::Svm => "Support Vector Machine",
            Algorithm::LogisticRegression => "Logistic Regression",
            Algorithm::RandomForest => "Random Forest",
            Algorithm::Knn => "K-Nearest Neighbors",
            Algorithm::NeuralNet => "Neural Network",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for Algorithm {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.abbreviation().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Hyperparameters {
    #[serde(rename = "DT")]
    DecisionTree(TreeParams),
    #[serde(rename = "NB")]
    NaiveBayes(NaiveBayesParams),
    #[serde(rename = "SVM")]
    Svm(SvmParams),
    #[serde(rename = "LR")]
    LogisticRegression(LogisticParams),
    #[serde(rename = "RF")]
    RandomForest(ForestParams),
    #[serde(rename = "KNN")]
    Knn(KnnParams),
    #[serde(rename = "NN")]
    NeuralNet(MlpParams),
}

impl Hyperparameters {
    pub fn defaults(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::DecisionTree => Self::DecisionTree(TreeParams::default()),
            Algorithm::NaiveBayes => Self::NaiveBayes(NaiveBayesParams::default()),
            Algorithm::Svm => Self::Svm(SvmParams::default()),
            Algorithm::LogisticRegression => Self::LogisticRegression(LogisticParams::default()),
            Algorithm::RandomForest => Self::RandomForest(ForestParams::default()),
            Algorithm::Knn => Self::Knn(KnnParams::default()),
            Algorithm::NeuralNet => Self::NeuralNet(MlpParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::DecisionTree(_) => Algorithm::DecisionTree,
            Self::NaiveBayes(_) => Algorithm::NaiveBayes,
            Self::Svm(_) => Algorithm::Svm,
            Self::LogisticRegression(_) => Algorithm::LogisticRegression,
            Self::RandomForest(_) => Algorithm::RandomForest,
            Self::Knn(_) => Algorithm::Knn,
            Self::NeuralNet(_) => Algorithm::NeuralNet,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self {
            Self::DecisionTree(p) => p.validate(),
            Self::NaiveBayes(p) => p.validate(),
            Self::Svm(p) => p.validate(),
            Self::LogisticRegression(p) => p.validate(),
            Self::RandomForest(p) => p.validate(),
            Self::Knn(p) => p.validate(),
            Self::NeuralNet(p) => p.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            hyperparameters: Hyperparameters::defaults(algorithm),
            seed,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.hyperparameters.algorithm()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.hyperparameters.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", content = "state")]
pub enum FittedParams<T> {
    Tree(DecisionTree<T>),
    Forest(RandomForest<T>),
    NaiveBayes(GaussianNb<T>),
    Linear(LinearModel<T>),
    Knn(Knn<T>),
    Mlp(Mlp<T>),
}

/// A fitted classifier together with the scaler and label set it was fitted with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainedModel<T> {
    pub spec: ClassifierSpec,
    pub labels: Vec<String>,
    pub scaler: MinMaxScaler<T>,
    pub params: FittedParams<T>,
    /// Wall-clock fitting time in seconds. Not a model parameter.
    pub training_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedLabel {
    pub label: String,
    pub score: f64,
}

/// Labels ordered by descending score.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedPredictions(pub Vec<RankedLabel>);

impl RankedPredictions {
    pub fn top(&self) -> Option<&RankedLabel> {
        self.0.first()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RankedLabel> {
        self.0.iter()
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(v: &[T]) -> Vec<T> {
    let max = v.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let exp: Vec<T> = v.iter().map(|&x| (x - max).exp()).collect();
    let total: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Per-class score plus a secondary key where smaller ranks first.
struct ClassScores<T> {
    score: Vec<T>,
    penalty: Option<Vec<T>>,
}

/// Fits `spec` on `train`, fitting a min-max scaler on `train` first.
pub fn fit<T: Scalar>(
    spec: &ClassifierSpec,
    train: &Dataset<T>,
) -> Result<TrainedModel<T>, ModelError> {
    let scaler = MinMaxScaler::fit(train)?;
    fit_with_scaler(spec, train, scaler)
}

/// Fits `spec` on `train` after applying the given scaler to every sample.
pub fn fit_with_scaler<T: Scalar>(
    spec: &ClassifierSpec,
    train: &Dataset<T>,
    scaler: MinMaxScaler<T>,
) -> Result<TrainedModel<T>, ModelError> {
    spec.validate()?;
    if train.is_empty() {
        return Err(ModelError::DegenerateData("training set is empty".into()));
    }
    let y = train.targets();
    let n_classes = train.labels().len();
    let present = {
        let mut seen = vec![false; n_classes];
        y.iter().for_each(|&c| seen[c] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if present < 2 {
        return Err(ModelError::DegenerateData(format!(
            "need at least 2 classes, training set has {present}"
        )));
    }
    let x: Vec<FeatureVector<T>> = train
        .samples()
        .iter()
        .map(|s| scaler.apply(&s.reading))
        .collect();

    let started = Instant::now();
    let params = match &spec.hyperparameters {
        Hyperparameters::DecisionTree(p) => {
            FittedParams::Tree(DecisionTree::fit(&x, &y, n_classes, p))
        }
        Hyperparameters::RandomForest(p) => {
            FittedParams::Forest(RandomForest::fit(&x, &y, n_classes, p, spec.seed))
        }
        Hyperparameters::NaiveBayes(p) => {
            FittedParams::NaiveBayes(GaussianNb::fit(&x, &y, n_classes, p))
        }
        Hyperparameters::LogisticRegression(p) => {
            FittedParams::Linear(LinearModel::fit_logistic(&x, &y, n_classes, p).0)
        }
        Hyperparameters::Svm(p) => {
            FittedParams::Linear(LinearModel::fit_svm(&x, &y, n_classes, p, spec.seed))
        }
        Hyperparameters::Knn(p) => FittedParams::Knn(Knn::fit(&x, &y, n_classes, p)),
        Hyperparameters::NeuralNet(p) => {
            FittedParams::Mlp(Mlp::fit(&x, &y, n_classes, p, spec.seed).0)
        }
    };
    let training_time = started.elapsed().as_secs_f64();

    Ok(TrainedModel {
        spec: spec.clone(),
        labels: train.labels().to_vec(),
        scaler,
        params,
        training_time,
    })
}

impl<T: Scalar> TrainedModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        self.spec.algorithm()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    fn class_scores(&self, x: &FeatureVector<T>) -> ClassScores<T> {
        let plain = |score| ClassScores {
            score,
            penalty: None,
        };
        match &self.params {
            FittedParams::Tree(t) => plain(t.scores(x)),
            FittedParams::Forest(f) => plain(f.scores(x)),
            FittedParams::NaiveBayes(nb) => plain(nb.scores(x)),
            FittedParams::Linear(l) => plain(l.scores(x)),
            FittedParams::Mlp(m) => plain(m.scores(x)),
            FittedParams::Knn(knn) => {
                let hood = knn.neighbourhood(x);
                let k = T::of_usize(hood.k);
                ClassScores {
                    score: hood.votes.iter().map(|&v| T::of_usize(v) / k).collect(),
                    penalty: Some(
                        hood.votes
                            .iter()
                            .zip(hood.distance_sums)
                            .map(|(&v, d)| if v == 0 { T::infinity() } else { d })
                            .collect(),
                    ),
                }
            }
        }
    }

    /// Class indices ordered best first: score descending, then penalty
    /// ascending (KNN only), then class index (lexicographic label order).
    fn ranking(&self, x: &FeatureVector<T>) -> (Vec<usize>, Vec<T>) {
        let scores = self.class_scores(x);
        let mut order: Vec<usize> = (0..scores.score.len()).collect();
        order.sort_by(|&a, &b| {
            let by_score = scores.score[b]
                .partial_cmp(&scores.score[a])
                .unwrap_or(Ordering::Equal);
            let by_penalty = scores.penalty.as_ref().map_or(Ordering::Equal, |p| {
                p[a].partial_cmp(&p[b]).unwrap_or(Ordering::Equal)
            });
            by_score.then(by_penalty).then(a.cmp(&b))
        });
        (order, scores.score)
    }

    fn check_input(r: &SensorReading<T>) -> Result<(), ModelError> {
        for (name, v) in crate::dataset::FEATURE_NAMES.iter().zip(r.to_array()) {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteInput(name));
            }
        }
        Ok(())
    }

    /// Predicted class index for an already-scaled feature vector.
    pub fn predict_scaled(&self, x: &FeatureVector<T>) -> usize {
        self.ranking(x).0[0]
    }

    pub fn predict(&self, r: &SensorReading<T>) -> Result<&str, ModelError> {
        Self::check_input(r)?;
        let class = self.predict_scaled(&self.scaler.apply(r));
        Ok(&self.labels[class])
    }

    pub fn predict_topk(
        &self,
        r: &SensorReading<T>,
        k: usize,
    ) -> Result<RankedPredictions, ModelError> {
        if k == 0 || k > self.n_classes() {
            return Err(ModelError::KOutOfRange {
                k,
                classes: self.n_classes(),
            });
        }
        Self::check_input(r)?;
        let (order, scores) = self.ranking(&self.scaler.apply(r));
        Ok(RankedPredictions(
            order
                .into_iter()
                .take(k)
                .map(|c| RankedLabel {
                    label: self.labels[c].clone(),
                    score: scores[c].as_f64(),
                })
                .collect(),
        ))
    }
}

/// Free-function form of [`TrainedModel::predict`].
pub fn predict<'m, T: Scalar>(
    m: &'m TrainedModel<T>,
    r: &SensorReading<T>,
) -> Result<&'m str, ModelError> {
    m.predict(r)
}

/// Free-function form of [`TrainedModel::predict_topk`].
pub fn predict_topk<T: Scalar>(
    m: &TrainedModel<T>,
    r: &SensorReading<T>,
    k: usize,
) -> Result<RankedPredictions, ModelError> {
    m.predict_topk(r, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;

    fn sample(v: [f64; 7], label: &str) -> LabeledSample<f64> {
        LabeledSample {
            reading: SensorReading::from_array(v),
            label: label.into(),
        }
    }

    fn three_class() -> Dataset<f64> {
        let mut rows = Vec::new();
        for (c, label) in ["a", "b", "c"].iter().enumerate() {
            for i in 0..6 {
                let base = c as f64 * 10.0 + i as f64 * 0.5;
                rows.push(sample([base, base, base, base, 50.0, 6.0, base], label));
            }
        }
        Dataset::new(rows)
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(
                a.abbreviation()
                    .to_lowercase()
                    .parse::<Algorithm>()
                    .unwrap(),
                a
            );
        }
        assert!("xgb".parse::<Algorithm>().is_err());
    }

    #[test]
    fn single_class_is_degenerate() {
        let d = Dataset::new(vec![sample([1.0; 7], "a"), sample([2.0; 7], "a")]);
        let err = fit(&ClassifierSpec::new(Algorithm::DecisionTree, 0), &d).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateData(_)));
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let spec = ClassifierSpec {
            hyperparameters: Hyperparameters::Knn(KnnParams { k: 0 }),
            seed: 0,
        };
        assert!(matches!(
            fit(&spec, &three_class()),
            Err(ModelError::InvalidSpec(_))
        ));
    }

    #[test]
    fn every_algorithm_topk_is_consistent() {
        let d = three_class();
        for a in Algorithm::ALL {
            let m = fit(&ClassifierSpec::new(a, 7), &d).unwrap();
            for s in d.samples() {
                let full = m.predict_topk(&s.reading, 3).unwrap();
                let mut labels: Vec<_> = full.iter().map(|r| r.label.clone()).collect();
                assert_eq!(
                    full.top().unwrap().label,
                    m.predict(&s.reading).unwrap(),
                    "{a}"
                );
                for pair in full.0.windows(2) {
                    assert!(pair[0].score >= pair[1].score, "{a}");
                }
                labels.sort();
                assert_eq!(labels, ["a", "b", "c"]);
            }
        }
    }

    #[test]
    fn k_out_of_range() {
        let m = fit(
            &ClassifierSpec::new(Algorithm::NaiveBayes, 0),
            &three_class(),
        )
        .unwrap();
        let r = SensorReading::from_array([1.0; 7]);
        assert!(matches!(
            m.predict_topk(&r, 0),
            Err(ModelError::KOutOfRange { .. })
        ));
        assert!(matches!(
            m.predict_topk(&r, 4),
            Err(ModelError::KOutOfRange { k: 4, classes: 3 })
        ));
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = fit(&ClassifierSpec::new(Algorithm::Knn, 0), &three_class()).unwrap();
        let mut r = SensorReading::from_array([1.0; 7]);
        r.humidity = f64::NAN;
        assert!(matches!(
            m.predict(&r),
            Err(ModelError::NonFiniteInput("humidity"))
        ));
    }

    #[test]
    fn score_ties_rank_lexicographically() {
        // Zero weights give every class the same score.
        let d = three_class();
        let mut m = fit(&ClassifierSpec::new(Algorithm::NaiveBayes, 0), &d).unwrap();
        m.params = FittedParams::Linear(LinearModel {
            weights: vec![[0.0; 7]; 3],
            bias: vec![0.0, 0.0, 0.0],
        });
        let ranked = m
            .predict_topk(&SensorReading::from_array([1.0; 7]), 3)
            .unwrap();
        let labels: Vec<_> = ranked.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c"]);
    }

    #[test]
    fn softmax_is_stable() {
        let s = softmax(&[1000.0f64, 1000.0]);
        assert_eq!(s, vec![0.5, 0.5]);
    }

    #[test]
    fn fits_in_f32() {
        let d: Dataset<f32> = three_class().cast();
        for a in Algorithm::ALL {
            let m = fit(&ClassifierSpec::new(a, 1), &d).unwrap();
            let first = &d.samples()[0];
            assert!(m
                .labels
                .contains(&m.predict(&first.reading).unwrap().to_string()));
        }
    }
}
