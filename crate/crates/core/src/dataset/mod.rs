//! Labeled agronomic samples: CSV loading, stratified splitting and min-max scaling.

mod scaler;
mod split;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Scalar;

pub use scaler::{apply_scaler, fit_scaler, MinMaxScaler};
pub use split::{split_indices, stratified_split, SplitIndices, SplitSpec};

pub const NUM_FEATURES: usize = 7;

/// Canonical feature order, spelled as in the public dataset header.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] =
    ["N", "P", "K", "temperature", "humidity", "ph", "rainfall"];

pub const LABEL_COLUMN: &str = "label";

/// Seven features in canonical order, possibly scaled.
pub type FeatureVector<T> = [T; NUM_FEATURES];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("schema error: unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("schema error: duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("invalid reading at row {row}: {reason}")]
    InvalidReading { row: usize, reason: String },
    #[error("dataset has no data rows")]
    Empty,
    #[error("stratification error: label `{label}` has {count} sample(s), need at least 2")]
    Stratification { label: String, count: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("label `{0}` is not in the label set")]
    UnknownLabel(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One reading of the seven agronomic measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SensorReading<T> {
    pub n: T,
    pub p: T,
    pub k: T,
    pub temperature: T,
    pub humidity: T,
    pub ph: T,
    pub rainfall: T,
}

impl<T: Scalar> SensorReading<T> {
    pub fn from_array(v: FeatureVector<T>) -> Self {
        let [n, p, k, temperature, humidity, ph, rainfall] = v;
        Self {
            n,
            p,
            k,
            temperature,
            humidity,
            ph,
            rainfall,
        }
    }

    pub fn to_array(&self) -> FeatureVector<T> {
        [
            self.n,
            self.p,
            self.k,
            self.temperature,
            self.humidity,
            self.ph,
            self.rainfall,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Checks the physical invariants of a reading. Returns the first problem found.
    pub fn check(&self) -> Result<(), String> {
        let v = self.to_array();
        for (name, x) in FEATURE_NAMES.iter().zip(v) {
            if !x.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        let zero = T::zero();
        for (name, x) in FEATURE_NAMES.iter().zip(v).take(3) {
            if x < zero {
                return Err(format!("{name} is negative"));
            }
        }
        if self.humidity < zero || self.humidity > T::of(100.0) {
            return Err("humidity outside [0, 100]".into());
        }
        if self.ph < zero || self.ph > T::of(14.0) {
            return Err("ph outside [0, 14]".into());
        }
        if self.rainfall < zero {
            return Err("rainfall is negative".into());
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> SensorReading<U> {
        SensorReading::from_array(self.to_array().map(|x| U::of(x.as_f64())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LabeledSample<T> {
    pub reading: SensorReading<T>,
    pub label: String,
}

/// Ordered labeled samples plus the sorted set of distinct labels.
///
/// Class indices everywhere in the crate are positions in `labels`, which is
/// kept in lexicographic order so "lowest index" and "lexicographically first"
/// coincide for tie-breaking.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    samples: Vec<LabeledSample<T>>,
    labels: Vec<String>,
    /// SHA-256 of the source file, when loaded from one.
    source_digest: Option<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset whose label set is exactly the labels present in `samples`.
    pub fn new(samples: Vec<LabeledSample<T>>) -> Self {
        let labels = samples
            .iter()
            .map(|s| s.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self {
            samples,
            labels,
            source_digest: None,
        }
    }

    /// Builds a dataset with an explicit (possibly larger) label set.
    pub fn with_labels(
        samples: Vec<LabeledSample<T>>,
        labels: impl IntoIterator<Item = String>,
    ) -> Result<Self, DatasetError> {
        let labels: Vec<String> = labels
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for s in &samples {
            if labels.binary_search(&s.label).is_err() {
                return Err(DatasetError::UnknownLabel(s.label.clone()));
            }
        }
        Ok(Self {
            samples,
            labels,
            source_digest: None,
        })
    }

    pub fn samples(&self) -> &[LabeledSample<T>] {
        &self.samples
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn feature_names(&self) -> [&'static str; NUM_FEATURES] {
        FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Class index of each sample, in sample order.
    pub fn targets(&self) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| {
                self.label_index(&s.label)
                    .expect("label set covers samples")
            })
            .collect()
    }

    pub fn features(&self) -> Vec<FeatureVector<T>> {
        self.samples.iter().map(|s| s.reading.to_array()).collect()
    }

    /// Sub-dataset of the given sample indices, keeping this dataset's label set.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: self.labels.clone(),
            source_digest: None,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| LabeledSample {
                    reading: s.reading.cast(),
                    label: s.label.clone(),
                })
                .collect(),
            labels: self.labels.clone(),
            source_digest: self.source_digest.clone(),
        }
    }

    /// Content hash: the SHA-256 of the source file when loaded from one,
    /// otherwise of a canonical CSV rendering of the samples.
    pub fn fingerprint(&self) -> String {
        if let Some(d) = &self.source_digest {
            return d.clone();
        }
        let mut hasher = Sha256::new();
        hasher.update(FEATURE_NAMES.join(",").as_bytes());
        for s in &self.samples {
            for v in s.reading.to_array() {
                hasher.update(format!(",{}", v.as_f64()).as_bytes());
            }
            hasher.update(format!(",{}\n", s.label).as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Loads a dataset from a CSV file.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>, DatasetError> {
    load_dataset_from_reader(File::open(path)?)
}

/// Loads a dataset from CSV text with a header row.
///
/// Columns may appear in any order; feature headers match case-insensitively
/// and the label column must be named `label`.
pub fn load_dataset_from_reader<T: Scalar, R: Read>(
    mut source: R,
) -> Result<Dataset<T>, DatasetError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = reader.headers()?.clone();

    let mut feature_cols = [usize::MAX; NUM_FEATURES];
    let mut label_col = usize::MAX;
    for (col, name) in headers.iter().enumerate() {
        let slot = if name.eq_ignore_ascii_case(LABEL_COLUMN) {
            &mut label_col
        } else if let Some(f) = FEATURE_NAMES
            .iter()
            .position(|f| f.eq_ignore_ascii_case(name))
        {
            &mut feature_cols[f]
        } else {
            return Err(DatasetError::UnexpectedColumn(name.to_string()));
        };
        if *slot != usize::MAX {
            return Err(DatasetError::DuplicateColumn(name.to_string()));
        }
        *slot = col;
    }
    for (f, &col) in feature_cols.iter().enumerate() {
        if col == usize::MAX {
            return Err(DatasetError::MissingColumn(FEATURE_NAMES[f].to_string()));
        }
    }
    if label_col == usize::MAX {
        return Err(DatasetError::MissingColumn(LABEL_COLUMN.to_string()));
    }

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = [T::zero(); NUM_FEATURES];
        for (f, &col) in feature_cols.iter().enumerate() {
            let cell = record.get(col).unwrap_or("");
            let parsed: f64 = cell.parse().map_err(|_| DatasetError::Parse {
                row,
                column: FEATURE_NAMES[f].to_string(),
                reason: if cell.is_empty() {
                    "missing value".to_string()
                } else {
                    format!("`{cell}` is not a number")
                },
            })?;
            values[f] = T::of(parsed);
        }
        let label = record.get(label_col).unwrap_or("");
        if label.is_empty() {
            return Err(DatasetError::Parse {
                row,
                column: LABEL_COLUMN.to_string(),
                reason: "missing label".to_string(),
            });
        }
        let reading = SensorReading::from_array(values);
        reading
            .check()
            .map_err(|reason| DatasetError::InvalidReading { row, reason })?;
        samples.push(LabeledSample {
            reading,
            label: label.to_string(),
        });
    }
    if samples.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut dataset = Dataset::new(samples);
    dataset.source_digest = Some(digest);
    Ok(dataset)
}
