use sha2::{Digest, Sha256};

/// Derives a component seed from a root seed.
///
/// The result is the first eight bytes, read little-endian, of
/// `SHA-256(root as u64 LE || label as UTF-8 || index as u64 LE)`.
/// Labels in use: `"data"` (trial trajectories), `"lyapunov"` (exponent
/// estimate), `"reservoir"` (per-trial reservoir weights, rooted at the
/// reservoir config's own seed).
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Serde adapter for seeds in TOML, whose integers are signed 64-bit.
/// Seeds up to `i64::MAX` are written as integers, larger ones as decimal
/// strings; both forms are accepted on input.
pub mod wide {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(|_| serde::de::Error::custom(format!("invalid seed '{t}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct Holder {
        #[serde(with = "wide")]
        seed: u64,
    }

    #[test]
    fn wide_seeds_survive_toml() {
        for seed in [0, 42, i64::MAX as u64, i64::MAX as u64 + 1, u64::MAX] {
            let text = toml::to_string(&Holder { seed }).unwrap();
            assert_eq!(toml::from_str::<Holder>(&text).unwrap().seed, seed, "{text}");
        }
        assert_eq!(toml::from_str::<Holder>("seed = 7").unwrap().seed, 7);
        assert!(toml::from_str::<Holder>("seed = \"x\"").is_err());
    }

    #[test]
    fn matches_direct_digest() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&7u64.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&3u64.to_le_bytes());
        let d = Sha256::digest(&bytes);
        let want = u64::from_le_bytes(d[..8].try_into().unwrap());
        assert_eq!(derive_seed(7, "data", 3), want);
    }

    #[test]
    fn components_differ() {
        assert_ne!(derive_seed(1, "data", 0), derive_seed(1, "data", 1));
        assert_ne!(derive_seed(1, "data", 0), derive_seed(1, "lyapunov", 0));
        assert_ne!(derive_seed(1, "data", 0), derive_seed(2, "data", 0));
    }
}
