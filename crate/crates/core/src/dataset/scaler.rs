use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, FeatureVector, SensorReading, NUM_FEATURES};
use crate::scalar::Scalar;

/// Per-feature affine rescaling `(x - min) / (max - min)` fitted on training data.
///
/// A feature whose training column is constant maps every input to 0. Serving
/// inputs outside the training range are not clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MinMaxScaler<T> {
    pub min: FeatureVector<T>,
    pub max: FeatureVector<T>,
}

impl<T: Scalar> MinMaxScaler<T> {
    pub fn fit(train: &Dataset<T>) -> Result<Self, DatasetError> {
        let mut rows = train.samples().iter().map(|s| s.reading.to_array());
        let first = rows.next().ok_or(DatasetError::Empty)?;
        let (mut min, mut max) = (first, first);
        for row in rows {
            for f in 0..NUM_FEATURES {
                min[f] = min[f].min(row[f]);
                max[f] = max[f].max(row[f]);
            }
        }
        Ok(Self { min, max })
    }

    /// The scaler that leaves every value unchanged (min 0, max 1).
    pub fn identity() -> Self {
        Self {
            min: [T::zero(); NUM_FEATURES],
            max: [T::one(); NUM_FEATURES],
        }
    }

    pub fn transform(&self, x: &FeatureVector<T>) -> FeatureVector<T> {
        let mut out = [T::zero(); NUM_FEATURES];
        for f in 0..NUM_FEATURES {
            let range = self.max[f] - self.min[f];
            if range > T::zero() {
                out[f] = (x[f] - self.min[f]) / range;
            }
        }
        out
    }

    pub fn apply(&self, r: &SensorReading<T>) -> FeatureVector<T> {
        self.transform(&r.to_array())
    }
}

/// Fits a scaler on the training split.
pub fn fit_scaler<T: Scalar>(train: &Dataset<T>) -> Result<MinMaxScaler<T>, DatasetError> {
    MinMaxScaler::fit(train)
}

/// Scales one reading.
pub fn apply_scaler<T: Scalar>(s: &MinMaxScaler<T>, r: &SensorReading<T>) -> FeatureVector<T> {
    s.apply(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Dataset<f64> {
        Dataset::new(
            values
                .iter()
                .map(|&v| LabeledSample {
                    reading: SensorReading::from_array([v, 5.0, v * 2.0, 1.0, 1.0, 1.0, 1.0]),
                    label: "x".into(),
                })
                .collect(),
        )
    }

    #[test]
    fn extrema_and_degenerate_column() {
        let s = fit_scaler(&column(&[10.0, 30.0, 20.0])).unwrap();
        assert_eq!((s.min[0], s.max[0]), (10.0, 30.0));
        assert_eq!((s.min[1], s.max[1]), (5.0, 5.0));
    }

    #[test]
    fn endpoints_and_affine_formula() {
        let mut s = fit_scaler(&column(&[10.0, 30.0, 20.0])).unwrap();
        let lo = apply_scaler(
            &s,
            &SensorReading::from_array([10.0, 5.0, 20.0, 1.0, 1.0, 1.0, 1.0]),
        );
        let hi = apply_scaler(
            &s,
            &SensorReading::from_array([30.0, 5.0, 60.0, 1.0, 1.0, 1.0, 1.0]),
        );
        assert_eq!(lo[0], 0.0);
        assert_eq!(hi[0], 1.0);
        assert_eq!(hi[2], 1.0);
        s.min[0] = 0.0;
        s.max[0] = 200.0;
        let mid = s.transform(&[50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(mid[0], 0.25);
    }

    #[test]
    fn constant_feature_maps_to_zero_and_no_clamping() {
        let s = fit_scaler(&column(&[10.0, 30.0])).unwrap();
        let out = s.transform(&[50.0, 1234.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(out[1], 0.0);
        assert_eq!(out[0], 2.0);
    }

    #[test]
    fn empty_train_is_error() {
        assert!(fit_scaler(&Dataset::<f64>::new(vec![])).is_err());
    }

    proptest! {
        #[test]
        fn training_rows_scale_into_unit_interval(values in proptest::collection::vec(0.0f64..1e4, 1..60)) {
            let d = column(&values);
            let s = fit_scaler(&d).unwrap();
            for sample in d.samples() {
                for v in s.apply(&sample.reading) {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
