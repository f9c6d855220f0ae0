use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed-point scale: values are stored as `round_half_up(x * 100)`.
pub const FIXED_POINT_SCALE: u64 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum FixedPointError {
    #[error("{field} = {value} cannot be stored as an unsigned fixed-point value")]
    Unrepresentable { field: &'static str, value: f64 },
}

/// Two-decimal unsigned fixed-point conversion, rounding half up.
pub fn to_fixed(field: &'static str, value: f64) -> Result<u64, FixedPointError> {
    let scaled = (value * FIXED_POINT_SCALE as f64 + 0.5).floor();
    if !value.is_finite() || value < 0.0 || scaled >= u64::MAX as f64 {
        return Err(FixedPointError::Unrepresentable { field, value });
    }
    Ok(scaled as u64)
}

pub fn from_fixed(v: u64) -> f64 {
    v as f64 / FIXED_POINT_SCALE as f64
}

/// Renders a fixed-point value with exactly two decimals.
pub fn render_fixed(v: u64) -> String {
    format!("{}.{:02}", v / FIXED_POINT_SCALE, v % FIXED_POINT_SCALE)
}

/// One stored forecast: a crop name and the seven readings it was made from,
/// in the contract's parameter order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    #[serde(rename = "cropName")]
    pub crop_name: String,
    pub n: u64,
    pub p: u64,
    pub k: u64,
    pub ph: u64,
    pub rain: u64,
    pub temp: u64,
    pub hum: u64,
}

impl PredictionRecord {
    /// Builds a record from real-valued readings given in feature order
    /// `[n, p, k, temperature, humidity, ph, rainfall]`.
    pub fn from_readings(
        crop_name: impl Into<String>,
        v: [f64; 7],
    ) -> Result<Self, FixedPointError> {
        Ok(Self {
            crop_name: crop_name.into(),
            n: to_fixed("n", v[0])?,
            p: to_fixed("p", v[1])?,
            k: to_fixed("k", v[2])?,
            temp: to_fixed("temp", v[3])?,
            hum: to_fixed("hum", v[4])?,
            ph: to_fixed("ph", v[5])?,
            rain: to_fixed("rain", v[6])?,
        })
    }

    /// Readings back in feature order `[n, p, k, temperature, humidity, ph, rainfall]`.
    pub fn readings(&self) -> [f64; 7] {
        [
            self.n, self.p, self.k, self.temp, self.hum, self.ph, self.rain,
        ]
        .map(from_fixed)
    }

    /// Numeric fields in contract parameter order `(n, p, k, ph, rain, temp, hum)`.
    pub fn fields(&self) -> [u64; 7] {
        [
            self.n, self.p, self.k, self.ph, self.rain, self.temp, self.hum,
        ]
    }
}

impl fmt::Display for PredictionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (n {}, p {}, k {}, ph {}, rain {}, temp {}, hum {})",
            self.crop_name,
            render_fixed(self.n),
            render_fixed(self.p),
            render_fixed(self.k),
            render_fixed(self.ph),
            render_fixed(self.rain),
            render_fixed(self.temp),
            render_fixed(self.hum)
        )
    }
}
