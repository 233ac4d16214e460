//! On-disk model container: a JSON object
//! `{"format": "freightledger.dwell-model", "version": 1, "model": {...}}`
//! with keys sorted and floats written in shortest round-trip form.

use serde::{Deserialize, Serialize};

use super::{DwellModel, PredictionError};

pub const MODEL_FORMAT: &str = "freightledger.dwell-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format: String,
    version: u32,
    model: DwellModel,
}

impl DwellModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let env = Envelope { format: MODEL_FORMAT.to_string(), version: MODEL_VERSION, model: self.clone() };
        let value = serde_json::to_value(&env).expect("model serializes");
        let mut out = serde_json::to_vec_pretty(&value).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DwellModel, PredictionError> {
        let head: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| PredictionError::ModelFile(e.to_string()))?;
        match head.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(PredictionError::ModelFile(format!("unexpected format {other:?}"))),
        }
        match head.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => return Err(PredictionError::ModelFile(format!("unsupported version {other:?}"))),
        }
        let env: Envelope = serde_json::from_value(head).map_err(|e| PredictionError::ModelFile(e.to_string()))?;
        let m = env.model;
        let (h, d) = (m.rnn.hidden_dim, m.rnn.input_dim);
        let shapes_ok = h >= 1
            && m.rnn.w_xh.len() == h * d
            && m.rnn.w_hh.len() == h * h
            && m.rnn.b_h.len() == h
            && m.rnn.w_o.len() == h
            && m.normalizer.mean.len() == d
            && m.normalizer.scale.len() == d;
        if !shapes_ok {
            return Err(PredictionError::ModelFile("parameter shapes do not match dimensions".into()));
        }
        if !m.rnn.is_finite() || m.normalizer.scale.iter().any(|s| !s.is_finite() || *s == 0.0) {
            return Err(PredictionError::ModelFile("non-finite parameter".into()));
        }
        Ok(m)
    }
}
