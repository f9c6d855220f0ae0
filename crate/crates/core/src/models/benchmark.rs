use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, Dataset, MinMaxScaler, SplitSpec};
use crate::scalar::Scalar;

use super::{evaluate, fit_with_scaler, Algorithm, ClassifierSpec, EvalReport, ModelError};

pub const REPORT_FORMAT: &str = "cropchain-benchmark";
pub const REPORT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub algorithm: Algorithm,
    pub name: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub algorithm: Algorithm,
    pub training_time: f64,
    pub testing_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub algorithm: Algorithm,
    pub accuracy: f64,
}

/// Results of fitting and scoring several classifiers on one split.
///
/// Metrics and timings live in separate sections: the metric section is a
/// pure function of (data, split, specs), timings are not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub format: String,
    pub version: u64,
    pub dataset_fingerprint: String,
    pub train_size: usize,
    pub test_size: usize,
    pub split: SplitSpec,
    pub specs: Vec<ClassifierSpec>,
    pub metrics: Vec<MetricRow>,
    pub timings: Vec<TimingRow>,
    pub accuracy_chart: Vec<AccuracyPoint>,
}

impl BenchmarkReport {
    pub fn rows(&self) -> Vec<EvalReport> {
        self.metrics
            .iter()
            .zip(&self.timings)
            .map(|(m, t)| EvalReport {
                algorithm: m.name.clone(),
                training_time: t.training_time,
                testing_time: t.testing_time,
                accuracy: m.accuracy,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            })
            .collect()
    }

    pub fn metric(&self, algorithm: Algorithm) -> Option<&MetricRow> {
        self.metrics.iter().find(|m| m.algorithm == algorithm)
    }

    /// Algorithm(s) with the highest accuracy.
    pub fn best(&self) -> Vec<Algorithm> {
        let top = self
            .metrics
            .iter()
            .map(|m| m.accuracy)
            .fold(f64::MIN, f64::max);
        self.metrics
            .iter()
            .filter(|m| m.accuracy == top)
            .map(|m| m.algorithm)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Plain-text table with the columns of the published comparison plus F1.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>13} {:>12} {:>12} {:>13} {:>10} {:>8}",
            "Algorithm",
            "Training Time",
            "Testing Time",
            "Accuracy (%)",
            "Precision (%)",
            "Recall (%)",
            "F1 (%)"
        );
        for r in self.rows() {
            let _ = writeln!(
                out,
                "{:<24} {:>13.3} {:>12.3} {:>12.2} {:>13.2} {:>10.2} {:>8.2}",
                r.algorithm,
                r.training_time,
                r.testing_time,
                r.accuracy,
                r.precision,
                r.recall,
                r.f1
            );
        }
        out
    }

    /// `algorithm,accuracy` CSV for bar charts.
    pub fn chart_csv(&self) -> String {
        let mut out = String::from("algorithm,accuracy\n");
        for p in &self.accuracy_chart {
            let _ = writeln!(out, "{},{:.4}", p.algorithm, p.accuracy);
        }
        out
    }
}

/// Splits `data`, fits one scaler on the training part, then fits and
/// evaluates every spec against the same split and scaler.
pub fn benchmark_suite<T: Scalar>(
    data: &Dataset<T>,
    split: &SplitSpec,
    specs: &[ClassifierSpec],
) -> Result<BenchmarkReport, ModelError> {
    if specs.is_empty() {
        return Err(ModelError::InvalidSpec("no classifiers requested".into()));
    }
    let (train, test) = stratified_split(data, split)?;
    let scaler = MinMaxScaler::fit(&train)?;

    let mut metrics = Vec::with_capacity(specs.len());
    let mut timings = Vec::with_capacity(specs.len());
    for spec in specs {
        let algorithm = spec.algorithm();
        let annotate = |e: ModelError| ModelError::Algorithm {
            algorithm: algorithm.display_name(),
            source: Box::new(e),
        };
        let model = fit_with_scaler(spec, &train, scaler.clone()).map_err(annotate)?;
        let report = evaluate(&model, &test).map_err(annotate)?;
        metrics.push(MetricRow {
            algorithm,
            name: report.algorithm,
            accuracy: report.accuracy,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
        });
        timings.push(TimingRow {
            algorithm,
            training_time: report.training_time,
            testing_time: report.testing_time,
        });
    }
    let accuracy_chart = metrics
        .iter()
        .map(|m| AccuracyPoint {
            algorithm: m.algorithm,
            accuracy: m.accuracy,
        })
        .collect();
    Ok(BenchmarkReport {
        format: REPORT_FORMAT.to_string(),
        version: REPORT_VERSION,
        dataset_fingerprint: data.fingerprint(),
        train_size: train.len(),
        test_size: test.len(),
        split: *split,
        specs: specs.to_vec(),
        metrics,
        timings,
        accuracy_chart,
    })
}
