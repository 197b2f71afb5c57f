//! Canonical serialization: a JSON map with lexicographically sorted keys and
//! no insignificant whitespace. Byte fields are lowercase hex at the type level.
//!
//! Parsing is strict: input is accepted only if re-serializing the parsed value
//! reproduces it byte for byte, so every value has exactly one encoding.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::digest::{sha256, Digest};

#[derive(Debug, thiserror::Error)]
pub enum CanonicalError {
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("input is not in canonical form")]
    NotCanonical,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serializes `value` canonically.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    // Routing through `Value` sorts every map, including struct fields.
    let tree = serde_json::to_value(value).map_err(|e| CanonicalError::Serialize(e.to_string()))?;
    serde_json::to_vec(&tree).map_err(|e| CanonicalError::Serialize(e.to_string()))
}

/// Canonical bytes for types whose serialization cannot fail (no non-string map
/// keys, no non-finite floats). Panics otherwise, which is a programming error.
pub fn canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    to_canonical(value).expect("value has a canonical encoding")
}

pub fn canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(canonical_bytes(value)).expect("JSON output is UTF-8")
}

/// SHA-256 of the canonical encoding.
pub fn canonical_digest<T: Serialize + ?Sized>(value: &T) -> Digest {
    sha256(&canonical_bytes(value))
}

/// Parses canonical bytes, rejecting any input that is not the unique encoding
/// of the value it decodes to.
pub fn from_canonical_slice<T: Serialize + DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    let value: T = serde_json::from_slice(bytes).map_err(|e| CanonicalError::Malformed(e.to_string()))?;
    if to_canonical(&value)? != bytes {
        return Err(CanonicalError::NotCanonical);
    }
    Ok(value)
}

pub fn write_canonical_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CanonicalError> {
    fs::write(path, to_canonical(value)?)?;
    Ok(())
}

pub fn read_canonical_file<T: Serialize + DeserializeOwned>(path: &Path) -> Result<T, CanonicalError> {
    let bytes = fs::read(path)?;
    from_canonical_slice(&bytes)
}
