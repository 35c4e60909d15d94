//! Stable identities for discoverable elements.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// What a discoverable element is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeKind {
    Column,
    Table,
    Document,
}

impl DeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeKind::Column => "column",
            DeKind::Table => "table",
            DeKind::Document => "document",
        }
    }
}

impl fmt::Display for DeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifier of a discoverable element: the first 16 bytes of
/// `SHA-256(kind \0 lake-relative path \0 name-or-offset)`.
///
/// Ordering is bytewise, which is also the ordering of the hex rendering;
/// every ranking in the crate breaks ties by ascending `DeId`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeId([u8; 16]);

impl DeId {
    pub fn derive(kind: DeKind, path: &str, name: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(kind.as_str().as_bytes());
        hasher.update([0u8]);
        hasher.update(path.as_bytes());
        hasher.update([0u8]);
        hasher.update(name.as_bytes());
        let digest = hasher.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        DeId(out)
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        DeId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid DE id {0:?}: expected 32 hex characters")]
pub struct ParseDeIdError(pub String);

impl FromStr for DeId {
    type Err = ParseDeIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 16];
        if s.len() != 32 {
            return Err(ParseDeIdError(s.to_string()));
        }
        hex::decode_to_slice(s, &mut out).map_err(|_| ParseDeIdError(s.to_string()))?;
        Ok(DeId(out))
    }
}

impl fmt::Display for DeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for DeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeId({})", self.to_hex())
    }
}

impl Serialize for DeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for DeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_kind_sensitive() {
        let a = DeId::derive(DeKind::Column, "tables/drugs.csv", "drug_id");
        let b = DeId::derive(DeKind::Column, "tables/drugs.csv", "drug_id");
        let c = DeId::derive(DeKind::Table, "tables/drugs.csv", "drug_id");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.to_hex().len(), 32);
    }

    #[test]
    fn hex_round_trip_and_ordering() {
        let a = DeId::from_bytes([0u8; 16]);
        let mut raw = [0u8; 16];
        raw[15] = 1;
        let b = DeId::from_bytes(raw);
        assert!(a < b);
        assert!(a.to_hex() < b.to_hex());
        assert_eq!(b.to_hex().parse::<DeId>().unwrap(), b);
        assert!("xyz".parse::<DeId>().is_err());
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, format!("\"{}\"", b.to_hex()));
    }
}
