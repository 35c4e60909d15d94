//! Seeded minwise hashing and the Jaccard-to-containment conversion.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinhashSignature {
    pub seed: u64,
    pub hashes: Vec<u64>,
    pub set_cardinality: usize,
}

/// The i-th member of the hash family is `splitmix64(base(token) ^ salt_i)`.
pub struct HashFamily {
    seed: u64,
    salts: Vec<u64>,
}

impl HashFamily {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        let salts = (0..num_hashes as u64).map(|i| splitmix64(seed ^ splitmix64(i.wrapping_add(1)))).collect();
        HashFamily { seed, salts }
    }

    pub fn len(&self) -> usize {
        self.salts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.salts.is_empty()
    }

    pub fn signature<'a, I>(&self, tokens: I) -> Result<MinhashSignature>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut hashes = vec![u64::MAX; self.salts.len()];
        let mut seen = std::collections::HashSet::new();
        for token in tokens {
            let base = fnv1a64(token.as_bytes());
            if !seen.insert(base) {
                continue;
            }
            let base = splitmix64(base ^ self.seed);
            for (slot, salt) in hashes.iter_mut().zip(&self.salts) {
                let h = splitmix64(base ^ salt);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        if seen.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(MinhashSignature { seed: self.seed, hashes, set_cardinality: seen.len() })
    }
}

pub fn minhash_signature(tokens: &BTreeSet<String>, num_hashes: usize, seed: u64) -> Result<MinhashSignature> {
    HashFamily::new(num_hashes, seed).signature(tokens.iter().map(String::as_str))
}

impl MinhashSignature {
    pub fn num_hashes(&self) -> usize {
        self.hashes.len()
    }

    pub fn check_compatible(&self, other: &MinhashSignature) -> Result<()> {
        if self.seed != other.seed || self.hashes.len() != other.hashes.len() {
            return Err(Error::IncompatibleSignatures(format!(
                "{} hashes/seed {:#x} vs {} hashes/seed {:#x}",
                self.hashes.len(),
                self.seed,
                other.hashes.len(),
                other.seed
            )));
        }
        Ok(())
    }

    /// Fraction of matching signature positions.
    pub fn jaccard(&self, other: &MinhashSignature) -> Result<f64> {
        self.check_compatible(other)?;
        let matches = self.hashes.iter().zip(&other.hashes).filter(|(a, b)| a == b).count();
        Ok(matches as f64 / self.hashes.len() as f64)
    }
}

/// Containment of A in B from the Jaccard estimate and exact cardinalities.
pub fn estimate_containment(a: &MinhashSignature, b: &MinhashSignature) -> Result<f64> {
    let j = a.jaccard(b)?;
    Ok(containment_from_jaccard(j, a.set_cardinality, b.set_cardinality))
}

pub fn containment_from_jaccard(j: f64, card_a: usize, card_b: usize) -> f64 {
    if card_a == 0 {
        return 0.0;
    }
    let est = j * (card_a + card_b) as f64 / ((1.0 + j) * card_a as f64);
    est.clamp(0.0, 1.0)
}

pub fn exact_containment<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    Ok(a.intersection(b).count() as f64 / a.len() as f64)
}

pub fn exact_jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
