//! Seeded 64-bit FNV-1a hashing.
//!
//! Feature hashing, split shuffles and annotation permutations all need a
//! hash that is stable across platforms and toolchain releases, which rules
//! out `std::collections::hash_map::DefaultHasher`.

const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy)]
pub struct StableHasher {
    state: u64,
}

impl StableHasher {
    pub fn new(seed: u64) -> Self {
        let mut h = StableHasher { state: OFFSET };
        h.write(&seed.to_le_bytes());
        h
    }

    pub fn write(&mut self, bytes: &[u8]) -> &mut Self {
        for &b in bytes {
            self.state ^= u64::from(b);
            self.state = self.state.wrapping_mul(PRIME);
        }
        self
    }

    /// Writes a length-prefixed string so that ("ab","c") and ("a","bc")
    /// hash differently.
    pub fn write_str(&mut self, s: &str) -> &mut Self {
        self.write(&(s.len() as u64).to_le_bytes());
        self.write(s.as_bytes())
    }

    pub fn finish(&self) -> u64 {
        // murmur3 finalizer; FNV alone mixes the high bits poorly
        let mut x = self.state;
        x ^= x >> 33;
        x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
        x ^= x >> 33;
        x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        x ^= x >> 33;
        x
    }
}

/// Hash of a sequence of string parts under `seed`.
pub fn hash_parts(seed: u64, parts: &[&str]) -> u64 {
    let mut h = StableHasher::new(seed);
    for p in parts {
        h.write_str(p);
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_are_length_prefixed() {
        assert_ne!(hash_parts(1, &["ab", "c"]), hash_parts(1, &["a", "bc"]));
    }

    #[test]
    fn seed_changes_hash() {
        assert_ne!(hash_parts(1, &["x"]), hash_parts(2, &["x"]));
        assert_eq!(hash_parts(7, &["x", "y"]), hash_parts(7, &["x", "y"]));
    }
}
