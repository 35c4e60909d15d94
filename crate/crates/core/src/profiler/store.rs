//! ProfileStore persistence: magic, JSON header, CBOR body.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SketchBundle;
use crate::config::ProfileConfig;
use crate::ids::DeId;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LLPROF01";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub num_hashes: usize,
    pub minhash_seed: u64,
    pub projection_seed: u64,
    pub provider: String,
    pub embedding_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub id: DeId,
    pub name: String,
    pub column_ids: Vec<DeId>,
    pub row_count: usize,
    pub metadata_tokens: std::collections::BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileStore {
    pub header: StoreHeader,
    pub bundles: BTreeMap<DeId, SketchBundle>,
    pub tables: BTreeMap<DeId, TableEntry>,
    /// DEs whose profiling degraded (e.g. empty content), with the reason.
    pub failures: BTreeMap<DeId, String>,
}

#[derive(Serialize, Deserialize)]
struct Body {
    bundles: BTreeMap<DeId, SketchBundle>,
    tables: BTreeMap<DeId, TableEntry>,
    failures: BTreeMap<DeId, String>,
}

#[derive(Serialize)]
struct BodyRef<'a> {
    bundles: &'a BTreeMap<DeId, SketchBundle>,
    tables: &'a BTreeMap<DeId, TableEntry>,
    failures: &'a BTreeMap<DeId, String>,
}

/// Writes `magic ‖ u32 header length ‖ JSON header ‖ CBOR body`.
pub(crate) fn write_framed<H: Serialize, B: Serialize>(magic: &[u8; 8], header: &H, body: &B) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(header.len() + 1024);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    ciborium::into_writer(body, &mut out).map_err(|e| Error::artifact("<memory>", e))?;
    Ok(out)
}

/// Splits a framed file into its parsed header and the raw CBOR body.
pub(crate) fn read_framed<'a, H: serde::de::DeserializeOwned>(
    magic: &[u8; 8],
    bytes: &'a [u8],
    path: &Path,
) -> Result<(H, &'a [u8])> {
    if bytes.len() < 12 || &bytes[..8] != magic {
        return Err(Error::artifact(path, "bad magic"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(12..12 + len).ok_or_else(|| Error::artifact(path, "truncated header"))?;
    let header = serde_json::from_slice(header_bytes)?;
    Ok((header, &bytes[12 + len..]))
}

pub(crate) fn decode_body<B: serde::de::DeserializeOwned>(body: &[u8], path: &Path) -> Result<B> {
    ciborium::from_reader(body).map_err(|e| Error::artifact(path, e))
}

impl ProfileStore {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = BodyRef { bundles: &self.bundles, tables: &self.tables, failures: &self.failures };
        write_framed(MAGIC, &self.header, &body)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_header(path: &Path) -> Result<StoreHeader> {
        let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
        Ok(read_framed::<StoreHeader>(MAGIC, &bytes, path)?.0)
    }

    /// Loads a store, refusing one built with different hashing parameters.
    pub fn load(path: &Path, expect: &ProfileConfig) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
        let (header, body): (StoreHeader, _) = read_framed(MAGIC, &bytes, path)?;
        if header.num_hashes != expect.num_hashes || header.minhash_seed != expect.minhash_seed {
            return Err(Error::ParamMismatch(format!(
                "store has {} hashes/seed {:#x}, config wants {}/{:#x}",
                header.num_hashes, header.minhash_seed, expect.num_hashes, expect.minhash_seed
            )));
        }
        if header.projection_seed != expect.projection_seed || header.embedding_dim != expect.embedding_dim {
            return Err(Error::ParamMismatch("embedding projection differs".into()));
        }
        let body: Body = decode_body(body, path)?;
        Ok(ProfileStore { header, bundles: body.bundles, tables: body.tables, failures: body.failures })
    }

    pub fn get(&self, id: DeId) -> Option<&SketchBundle> {
        self.bundles.get(&id)
    }

    /// 200-dim input encoding (metadata ‖ content) of a profiled DE.
    pub fn input_encoding(&self, id: DeId) -> Option<Vec<f64>> {
        self.bundles.get(&id)?.solo.as_ref().map(|s| s.input_encoding())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ProfileStore {
        ProfileStore {
            header: StoreHeader {
                num_hashes: 512,
                minhash_seed: ProfileConfig::default().minhash_seed,
                projection_seed: ProfileConfig::default().projection_seed,
                provider: "hashed".into(),
                embedding_dim: 100,
            },
            bundles: BTreeMap::new(),
            tables: BTreeMap::new(),
            failures: BTreeMap::new(),
        }
    }

    #[test]
    fn round_trip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.bin");
        store().save(&path).unwrap();
        let cfg = ProfileConfig::default();
        assert_eq!(ProfileStore::load(&path, &cfg).unwrap(), store());
        let other = ProfileConfig { num_hashes: 128, ..cfg.clone() };
        assert!(matches!(ProfileStore::load(&path, &other), Err(Error::ParamMismatch(_))));
        let other = ProfileConfig { minhash_seed: 1, ..cfg };
        assert!(matches!(ProfileStore::load(&path, &other), Err(Error::ParamMismatch(_))));
    }
}
