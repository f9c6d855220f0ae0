//! Simulated sensor telemetry: message generation, validation and smoothing.
//!
//! Readings arrive as composite messages, one per device per tick, carrying
//! all seven measurements:
//!
//! ```json
//! {"device_id":"sim-000","timestamp":1710969512,"n":90.0,"p":42.0,"k":43.0,
//!  "temperature":20.88,"humidity":82.0,"ph":6.5,"rainfall":202.94}
//! ```

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureVector, SensorReading, FEATURE_NAMES, NUM_FEATURES};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum TelemetryError {
    #[error("simulator config error: {0}")]
    Config(String),
    #[error("window error: {0}")]
    Window(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorMessage {
    pub device_id: String,
    pub timestamp: u64,
    pub n: f64,
    pub p: f64,
    pub k: f64,
    pub temperature: f64,
    pub humidity: f64,
    pub ph: f64,
    pub rainfall: f64,
}

impl SensorMessage {
    pub fn values(&self) -> [f64; NUM_FEATURES] {
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

    pub fn from_values(
        device_id: impl Into<String>,
        timestamp: u64,
        v: [f64; NUM_FEATURES],
    ) -> Self {
        Self {
            device_id: device_id.into(),
            timestamp,
            n: v[0],
            p: v[1],
            k: v[2],
            temperature: v[3],
            humidity: v[4],
            ph: v[5],
            rainfall: v[6],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Dataset rows in order, wrapping around.
    Replay,
    /// A uniformly chosen crop, each feature uniform within that crop's observed range.
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: SimMode,
    /// Messages per second across all devices.
    pub rate: f64,
    pub seed: u64,
    pub devices: usize,
    /// Timestamp of step 0, unix seconds.
    pub start_timestamp: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: SimMode::Replay,
            rate: 10.0,
            seed: 42,
            devices: 1,
            start_timestamp: 1_710_969_512,
        }
    }
}

/// Generates messages from a dataset. Output depends only on (config, step).
pub struct Simulator<'a, T> {
    cfg: SimConfig,
    data: &'a Dataset<T>,
    /// Per-label feature extrema, in label order.
    ranges: Vec<(FeatureVector<f64>, FeatureVector<f64>)>,
}

impl<'a, T: Scalar> Simulator<'a, T> {
    pub fn new(cfg: SimConfig, data: &'a Dataset<T>) -> Result<Self, TelemetryError> {
        if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
            return Err(TelemetryError::Config("rate must be > 0".into()));
        }
        if cfg.devices == 0 {
            return Err(TelemetryError::Config("device count must be >= 1".into()));
        }
        if cfg.start_timestamp == 0 {
            return Err(TelemetryError::Config("start timestamp must be > 0".into()));
        }
        if data.is_empty() {
            return Err(TelemetryError::Config("dataset is empty".into()));
        }
        let mut by_label: BTreeMap<&str, (FeatureVector<f64>, FeatureVector<f64>)> =
            BTreeMap::new();
        for s in data.samples() {
            let v = s.reading.to_array().map(Scalar::as_f64);
            let entry = by_label.entry(s.label.as_str()).or_insert((v, v));
            for f in 0..NUM_FEATURES {
                entry.0[f] = entry.0[f].min(v[f]);
                entry.1[f] = entry.1[f].max(v[f]);
            }
        }
        Ok(Self {
            cfg,
            data,
            ranges: by_label.into_values().collect(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn generate_message(&self, step: u64) -> SensorMessage {
        let device_id = format!("sim-{:03}", step % self.cfg.devices as u64);
        let timestamp = self.cfg.start_timestamp + (step as f64 / self.cfg.rate).floor() as u64;
        let values = match self.cfg.mode {
            SimMode::Replay => {
                let row = (step % self.data.len() as u64) as usize;
                self.data.samples()[row]
                    .reading
                    .to_array()
                    .map(Scalar::as_f64)
            }
            SimMode::Synthetic => {
                let mut rng = SeededRng::for_stream(self.cfg.seed, step);
                let (lo, hi) = self.ranges[rng.below(self.ranges.len())];
                std::array::from_fn(|f| rng.uniform(lo[f], hi[f]).clamp(lo[f], hi[f]))
            }
        };
        SensorMessage::from_values(device_id, timestamp, values)
    }
}

/// Free-function form of [`Simulator::generate_message`].
pub fn generate_message<T: Scalar>(
    cfg: &SimConfig,
    data: &Dataset<T>,
    step: u64,
) -> Result<SensorMessage, TelemetryError> {
    Ok(Simulator::new(cfg.clone(), data)?.generate_message(step))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    NRange,
    PRange,
    KRange,
    TemperatureRange,
    HumidityRange,
    PhRange,
    RainfallRange,
    NonFinite,
    EmptyDeviceId,
    BadTimestamp,
}

impl ReasonCode {
    fn range_for(feature: usize) -> Self {
        [
            Self::NRange,
            Self::PRange,
            Self::KRange,
            Self::TemperatureRange,
            Self::HumidityRange,
            Self::PhRange,
            Self::RainfallRange,
        ][feature]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NRange => "N_RANGE",
            Self::PRange => "P_RANGE",
            Self::KRange => "K_RANGE",
            Self::TemperatureRange => "TEMPERATURE_RANGE",
            Self::HumidityRange => "HUMIDITY_RANGE",
            Self::PhRange => "PH_RANGE",
            Self::RainfallRange => "RAINFALL_RANGE",
            Self::NonFinite => "NON_FINITE",
            Self::EmptyDeviceId => "EMPTY_DEVICE_ID",
            Self::BadTimestamp => "BAD_TIMESTAMP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRejection {
    pub field: String,
    pub code: ReasonCode,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub reasons: Vec<FieldRejection>,
}

impl Rejection {
    pub fn codes(&self) -> Vec<ReasonCode> {
        self.reasons.iter().map(|r| r.code).collect()
    }

    pub fn has(&self, code: ReasonCode) -> bool {
        self.reasons.iter().any(|r| r.code == code)
    }
}

/// Closed admissible interval per feature, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRule {
    pub intervals: [(f64, f64); NUM_FEATURES],
}

impl Default for ValidationRule {
    fn default() -> Self {
        Self {
            intervals: [
                (0.0, 300.0),
                (0.0, 300.0),
                (0.0, 300.0),
                (-20.0, 60.0),
                (0.0, 100.0),
                (0.0, 14.0),
                (0.0, 1000.0),
            ],
        }
    }
}

impl ValidationRule {
    /// Per-field problems with seven raw values; empty when all are admissible.
    pub fn check_values(&self, values: &[f64; NUM_FEATURES]) -> Vec<FieldRejection> {
        values
            .iter()
            .enumerate()
            .filter_map(|(f, &v)| {
                let (lo, hi) = self.intervals[f];
                let code = if !v.is_finite() {
                    ReasonCode::NonFinite
                } else if v < lo || v > hi {
                    ReasonCode::range_for(f)
                } else {
                    return None;
                };
                Some(FieldRejection {
                    field: FEATURE_NAMES[f].to_string(),
                    code,
                })
            })
            .collect()
    }

    pub fn validate_values<T: Scalar>(
        &self,
        values: &[f64; NUM_FEATURES],
    ) -> Result<SensorReading<T>, Rejection> {
        let reasons = self.check_values(values);
        if reasons.is_empty() {
            Ok(SensorReading::from_array(values.map(T::of)))
        } else {
            Err(Rejection { reasons })
        }
    }
}

/// Accepts a message iff its identity fields are well formed and every
/// measurement is finite and inside its interval.
pub fn validate_message<T: Scalar>(
    msg: &SensorMessage,
    rules: &ValidationRule,
) -> Result<SensorReading<T>, Rejection> {
    let mut reasons = Vec::new();
    if msg.device_id.trim().is_empty() {
        reasons.push(FieldRejection {
            field: "device_id".into(),
            code: ReasonCode::EmptyDeviceId,
        });
    }
    if msg.timestamp == 0 {
        reasons.push(FieldRejection {
            field: "timestamp".into(),
            code: ReasonCode::BadTimestamp,
        });
    }
    reasons.extend(rules.check_values(&msg.values()));
    if reasons.is_empty() {
        Ok(SensorReading::from_array(msg.values().map(T::of)))
    } else {
        Err(Rejection { reasons })
    }
}

/// Per-feature mean of the last `w` readings.
pub fn aggregate_window<T: Scalar>(
    readings: &[SensorReading<T>],
    w: usize,
) -> Result<FeatureVector<T>, TelemetryError> {
    if readings.is_empty() {
        return Err(TelemetryError::Window("no readings".into()));
    }
    if w == 0 || w > readings.len() {
        return Err(TelemetryError::Window(format!(
            "window {w} outside 1..={}",
            readings.len()
        )));
    }
    let tail = &readings[readings.len() - w..];
    if w == 1 {
        return Ok(tail[0].to_array());
    }
    let mut sum = [T::zero(); NUM_FEATURES];
    for r in tail {
        for (s, v) in sum.iter_mut().zip(r.to_array()) {
            *s += v;
        }
    }
    let n = T::of_usize(w);
    Ok(sum.map(|s| s / n))
}

/// Independent per-device ring buffers feeding [`aggregate_window`].
#[derive(Debug)]
pub struct DeviceWindows<T> {
    window: usize,
    buffers: HashMap<String, VecDeque<SensorReading<T>>>,
}

impl<T: Scalar> DeviceWindows<T> {
    pub fn new(window: usize) -> Result<Self, TelemetryError> {
        if window == 0 {
            return Err(TelemetryError::Window("window must be >= 1".into()));
        }
        Ok(Self {
            window,
            buffers: HashMap::new(),
        })
    }

    /// Records a reading and returns the device's smoothed reading. Until the
    /// buffer fills, the mean covers whatever has arrived.
    pub fn push(&mut self, device_id: &str, reading: SensorReading<T>) -> SensorReading<T> {
        let buf = self.buffers.entry(device_id.to_string()).or_default();
        buf.push_back(reading);
        while buf.len() > self.window {
            buf.pop_front();
        }
        let readings: Vec<SensorReading<T>> = buf.iter().copied().collect();
        let mean = aggregate_window(&readings, readings.len()).expect("buffer is non-empty");
        SensorReading::from_array(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;
    use proptest::prelude::*;

    fn data() -> Dataset<f64> {
        let rows = [
            ([90.0, 42.0, 43.0, 20.9, 82.0, 6.5, 202.9], "rice"),
            ([71.0, 54.0, 16.0, 22.6, 63.7, 5.7, 87.8], "maize"),
            ([85.0, 58.0, 41.0, 21.8, 80.3, 7.0, 226.7], "rice"),
            ([60.0, 35.0, 20.0, 25.0, 70.0, 6.0, 100.0], "maize"),
        ];
        Dataset::new(
            rows.iter()
                .map(|(v, l)| LabeledSample {
                    reading: SensorReading::from_array(*v),
                    label: l.to_string(),
                })
                .collect(),
        )
    }

    fn mid() -> SensorMessage {
        SensorMessage::from_values("dev", 10, [100.0, 100.0, 100.0, 20.0, 50.0, 7.0, 500.0])
    }

    #[test]
    fn replay_emits_rows_in_order() {
        let d = data();
        let sim = Simulator::new(SimConfig::default(), &d).unwrap();
        assert_eq!(
            sim.generate_message(0).values(),
            d.samples()[0].reading.to_array()
        );
        assert_eq!(
            sim.generate_message(5).values(),
            d.samples()[1].reading.to_array()
        );
    }

    #[test]
    fn synthetic_is_deterministic_and_bounded() {
        let d = data();
        let cfg = SimConfig {
            mode: SimMode::Synthetic,
            devices: 3,
            ..SimConfig::default()
        };
        let sim = Simulator::new(cfg, &d).unwrap();
        for step in 0..200 {
            let m = sim.generate_message(step);
            assert_eq!(m, sim.generate_message(step));
            for (f, v) in m.values().iter().enumerate() {
                let col = d.samples().iter().map(|s| s.reading.to_array()[f]);
                let lo = col.clone().fold(f64::MAX, f64::min);
                let hi = col.fold(f64::MIN, f64::max);
                assert!(*v >= lo && *v <= hi);
            }
            assert!(validate_message::<f64>(&m, &ValidationRule::default()).is_ok());
        }
    }

    #[test]
    fn config_errors() {
        let empty = Dataset::<f64>::new(vec![]);
        assert!(matches!(
            Simulator::new(SimConfig::default(), &empty),
            Err(TelemetryError::Config(_))
        ));
        let d = data();
        assert!(Simulator::new(
            SimConfig {
                rate: 0.0,
                ..SimConfig::default()
            },
            &d
        )
        .is_err());
        assert!(Simulator::new(
            SimConfig {
                devices: 0,
                ..SimConfig::default()
            },
            &d
        )
        .is_err());
    }

    #[test]
    fn timestamps_follow_rate() {
        let d = data();
        let sim = Simulator::new(
            SimConfig {
                rate: 2.0,
                ..SimConfig::default()
            },
            &d,
        )
        .unwrap();
        assert_eq!(sim.generate_message(0).timestamp, 1_710_969_512);
        assert_eq!(sim.generate_message(3).timestamp, 1_710_969_513);
    }

    #[test]
    fn validation_codes() {
        let rules = ValidationRule::default();
        assert!(validate_message::<f64>(&mid(), &rules).is_ok());

        let mut acid = mid();
        acid.ph = 15.0;
        let rej = validate_message::<f64>(&acid, &rules).unwrap_err();
        assert_eq!(rej.codes(), vec![ReasonCode::PhRange]);
        assert_eq!(
            serde_json::to_string(&rej.reasons[0].code).unwrap(),
            "\"PH_RANGE\""
        );

        let mut wet = mid();
        wet.humidity = f64::NAN;
        wet.device_id.clear();
        let rej = validate_message::<f64>(&wet, &rules).unwrap_err();
        assert!(rej.has(ReasonCode::NonFinite));
        assert!(rej.has(ReasonCode::EmptyDeviceId));
        assert_eq!(
            rej.reasons
                .iter()
                .find(|r| r.code == ReasonCode::NonFinite)
                .unwrap()
                .field,
            "humidity"
        );
    }

    #[test]
    fn window_mean() {
        let a = SensorReading::from_array([10.0; 7]);
        let b = SensorReading::from_array([20.0; 7]);
        assert_eq!(aggregate_window(&[a, b], 1).unwrap(), b.to_array());
        assert_eq!(aggregate_window(&[a, b], 2).unwrap(), [15.0; 7]);
        assert!(aggregate_window(&[a, b], 3).is_err());
        assert!(aggregate_window::<f64>(&[], 1).is_err());
    }

    #[test]
    fn device_windows_are_independent() {
        let mut w = DeviceWindows::new(2).unwrap();
        w.push("a", SensorReading::from_array([10.0; 7]));
        w.push("b", SensorReading::from_array([100.0; 7]));
        let out = w.push("a", SensorReading::from_array([20.0; 7]));
        assert_eq!(out.n, 15.0);
        let out = w.push("a", SensorReading::from_array([40.0; 7]));
        assert_eq!(out.n, 30.0);
    }

    proptest! {
        #[test]
        fn replay_cycles_each_row(n in 1u64..4) {
            let d = data();
            let sim = Simulator::new(SimConfig::default(), &d).unwrap();
            let mut counts = vec![0u64; d.len()];
            for step in 0..n * d.len() as u64 {
                let v = sim.generate_message(step).values();
                let row = d.samples().iter().position(|s| s.reading.to_array() == v).unwrap();
                counts[row] += 1;
            }
            prop_assert!(counts.iter().all(|&c| c == n));
        }

        #[test]
        fn mean_of_identical_readings_is_that_reading(v in proptest::array::uniform7(0.0f64..300.0), w in 1usize..8) {
            let r = SensorReading::from_array(v);
            let readings = vec![r; w];
            let out = aggregate_window(&readings, w).unwrap();
            for f in 0..NUM_FEATURES {
                prop_assert!((out[f] - v[f]).abs() <= 1e-12 * v[f].abs().max(1.0));
            }
        }
    }
}
