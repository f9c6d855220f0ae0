//! Call data for the contract's `addPrediction` function.
//!
//! ```text
//! selector (4) | name length L (2, BE) | name (L, UTF-8) | n p k ph rain temp hum (7 x 8, BE)
//! ```
//! The selector is the first four bytes of the Keccak-256 of
//! [`ADD_PREDICTION_SIGNATURE`].

use thiserror::Error;

use crate::hash::keccak256;
use crate::record::PredictionRecord;

pub const ADD_PREDICTION_SIGNATURE: &str =
    "addPrediction(string,uint256,uint256,uint256,uint256,uint256,uint256,uint256)";

const HEADER_LEN: usize = 6;
const FIELDS_LEN: usize = 7 * 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("crop name must be 1..=65535 bytes, got {0}")]
    NameLength(usize),
    #[error("unknown function selector 0x{}", hex::encode(.0))]
    UnknownFunction([u8; 4]),
    #[error("malformed call data: {0}")]
    Malformed(String),
    #[error("crop name is not valid UTF-8")]
    Encoding,
}

pub fn add_prediction_selector() -> [u8; 4] {
    let h = keccak256(ADD_PREDICTION_SIGNATURE.as_bytes());
    [h.0[0], h.0[1], h.0[2], h.0[3]]
}

pub fn encode_add_prediction(rec: &PredictionRecord) -> Result<Vec<u8>, CodecError> {
    let name = rec.crop_name.as_bytes();
    if name.is_empty() || name.len() > u16::MAX as usize {
        return Err(CodecError::NameLength(name.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + name.len() + FIELDS_LEN);
    out.extend_from_slice(&add_prediction_selector());
    out.extend_from_slice(&(name.len() as u16).to_be_bytes());
    out.extend_from_slice(name);
    for v in rec.fields() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

pub fn decode_add_prediction(data: &[u8]) -> Result<PredictionRecord, CodecError> {
    if data.len() < 4 {
        return Err(CodecError::Malformed(format!(
            "{} bytes is shorter than a selector",
            data.len()
        )));
    }
    let selector: [u8; 4] = data[..4].try_into().expect("4 bytes");
    if selector != add_prediction_selector() {
        return Err(CodecError::UnknownFunction(selector));
    }
    if data.len() < HEADER_LEN {
        return Err(CodecError::Malformed("missing name length".into()));
    }
    let name_len = u16::from_be_bytes([data[4], data[5]]) as usize;
    if name_len == 0 {
        return Err(CodecError::Malformed("empty crop name".into()));
    }
    let expected = HEADER_LEN + name_len + FIELDS_LEN;
    if data.len() != expected {
        return Err(CodecError::Malformed(format!(
            "expected {expected} bytes, got {}",
            data.len()
        )));
    }
    let name = std::str::from_utf8(&data[HEADER_LEN..HEADER_LEN + name_len])
        .map_err(|_| CodecError::Encoding)?;
    let mut fields = [0u64; 7];
    for (i, chunk) in data[HEADER_LEN + name_len..].chunks_exact(8).enumerate() {
        fields[i] = u64::from_be_bytes(chunk.try_into().expect("8 bytes"));
    }
    let [n, p, k, ph, rain, temp, hum] = fields;
    Ok(PredictionRecord {
        crop_name: name.to_string(),
        n,
        p,
        k,
        ph,
        rain,
        temp,
        hum,
    })
}
