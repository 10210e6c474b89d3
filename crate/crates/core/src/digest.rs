//! Stable content digests used by transcripts, state snapshots and reports.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
///
/// Every map in the crate's serialisable types is a `BTreeMap` (or a
/// `serde_json::Value` object, which is ordered), so the encoding is stable.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    sha256_hex(&bytes)
}
