//! Canonical payload encoding: compact JSON with object keys sorted
//! lexicographically at every depth. Integers are emitted from fixed-width
//! Rust types, so the bytes do not depend on platform or field order in the
//! source struct.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::LedgerError;

pub fn to_canonical<T: Serialize + ?Sized>(payload: &T) -> Result<Vec<u8>, LedgerError> {
    // `serde_json::Value` keeps objects in a BTreeMap, which sorts the keys.
    let value = serde_json::to_value(payload).map_err(|e| LedgerError::Serialization(e.to_string()))?;
    serde_json::to_vec(&value).map_err(|e| LedgerError::Serialization(e.to_string()))
}

pub fn from_canonical<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, LedgerError> {
    serde_json::from_slice(bytes).map_err(|e| LedgerError::Decode(e.to_string()))
}
