//! Model files: a JSON envelope naming the format, its version and the float
//! width, wrapping the serialized [`TrainedModel`].
//!
//! ```text
//! {"format":"cropchain-model","version":1,"scalar":"f64","model":{...}}
//! ```

use std::io::{Read, Write};

use serde::Serialize;
use serde_json::Value;

use crate::scalar::Scalar;

use super::{ModelError, TrainedModel};

pub const MODEL_FORMAT: &str = "cropchain-model";
pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct Envelope<'a, T> {
    format: &'static str,
    version: u64,
    scalar: &'static str,
    model: &'a TrainedModel<T>,
}

pub fn save_model<T: Scalar, W: Write>(m: &TrainedModel<T>, mut sink: W) -> Result<(), ModelError> {
    let envelope = Envelope {
        format: MODEL_FORMAT,
        version: MODEL_FORMAT_VERSION,
        scalar: T::NAME,
        model: m,
    };
    serde_json::to_writer(&mut sink, &envelope).map_err(|e| ModelError::Format(e.to_string()))?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn load_model<T: Scalar, R: Read>(mut source: R) -> Result<TrainedModel<T>, ModelError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut value: Value = serde_json::from_slice(&bytes)
        .map_err(|e| ModelError::Format(format!("unreadable model file: {e}")))?;
    let field = |name: &str| value.get(name).cloned();

    match field("format").as_ref().and_then(Value::as_str) {
        Some(MODEL_FORMAT) => {}
        other => {
            return Err(ModelError::Format(format!(
                "expected format `{MODEL_FORMAT}`, found {other:?}"
            )))
        }
    }
    let version = field("version")
        .as_ref()
        .and_then(Value::as_u64)
        .ok_or_else(|| ModelError::Format("missing version".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    match field("scalar").as_ref().and_then(Value::as_str) {
        Some(s) if s == T::NAME => {}
        other => {
            return Err(ModelError::Format(format!(
                "model stores {other:?} scalars, expected {}",
                T::NAME
            )))
        }
    }
    let model = value
        .get_mut("model")
        .map(Value::take)
        .ok_or_else(|| ModelError::Format("missing model".into()))?;
    serde_json::from_value(model)
        .map_err(|e| ModelError::Format(format!("invalid model payload: {e}")))
}
