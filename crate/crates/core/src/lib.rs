//! Crop recommendation pipeline: dataset handling, min-max scaling, seven
//! classifiers with ranked predictions, benchmarking, and simulated sensor
//! telemetry.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the unsuffixed
//! aliases below fix it to `f64`.

// Feature-indexed loops mirror the maths, and `!(a < b)` deliberately treats NaN as failure.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod telemetry;

pub use scalar::Scalar;

pub type SensorReading = dataset::SensorReading<f64>;
pub type LabeledSample = dataset::LabeledSample<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type MinMaxScaler = dataset::MinMaxScaler<f64>;
pub type FeatureVector = dataset::FeatureVector<f64>;
pub type TrainedModel = models::TrainedModel<f64>;

pub type SensorReading32 = dataset::SensorReading<f32>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type TrainedModel32 = models::TrainedModel<f32>;
