//! Message digests (the `H` box of the envelope pipeline).

use sha2::Sha256;
use sha3::{Digest as _, Sha3_256};

/// Supported 256-bit hash functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashAlgorithm {
    Sha2_256,
    #[default]
    Sha3_256,
}

/// A 32-byte digest tagged with the algorithm that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest {
    algorithm: HashAlgorithm,
    bytes: [u8; 32],
}

impl Digest {
    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.bytes
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.bytes
    }
}

pub fn hash(message: &[u8], algorithm: HashAlgorithm) -> Digest {
    let bytes: [u8; 32] = match algorithm {
        HashAlgorithm::Sha2_256 => Sha256::digest(message).into(),
        HashAlgorithm::Sha3_256 => Sha3_256::digest(message).into(),
    };
    Digest { algorithm, bytes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(d: &Digest) -> String {
        d.as_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn empty_string_vectors() {
        assert_eq!(
            hex(&hash(b"", HashAlgorithm::Sha3_256)),
            "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"
        );
        assert_eq!(
            hex(&hash(b"", HashAlgorithm::Sha2_256)),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn abc_vectors() {
        assert_eq!(
            hex(&hash(b"abc", HashAlgorithm::Sha3_256)),
            "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532"
        );
        assert_eq!(
            hex(&hash(b"abc", HashAlgorithm::Sha2_256)),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn algorithm_tag_follows_input() {
        let d = hash(b"x", HashAlgorithm::Sha2_256);
        assert_eq!(d.algorithm(), HashAlgorithm::Sha2_256);
        assert_eq!(hash(b"x", HashAlgorithm::Sha2_256), d);
    }

    #[test]
    fn single_bit_difference_changes_digest() {
        let a = [0u8; 64];
        for bit in 0..512 {
            let mut b = a;
            b[bit / 8] ^= 1 << (bit % 8);
            for alg in [HashAlgorithm::Sha2_256, HashAlgorithm::Sha3_256] {
                assert_ne!(hash(&a, alg), hash(&b, alg));
            }
        }
    }
}
