//! Cryptographic primitives composed by the QGP message envelope.
//!
//! Every operation is a pure function of its inputs. Randomness is always
//! passed in explicitly as seed bytes, so the same inputs produce the same
//! keys, ciphertexts and signatures on every platform.
//!
//! | concern        | algorithm                                   |
//! |----------------|---------------------------------------------|
//! | hashing        | SHA3-256 (default), SHA2-256                |
//! | signatures     | CRYSTALS-Dilithium, parameter set Dilithium3 (round 3.1) |
//! | key exchange   | CRYSTALS-Kyber, parameter set Kyber768 (round 3) |
//! | symmetric      | AES-256-GCM                                 |
//! | compression    | raw DEFLATE (RFC 1951)                      |

#![forbid(unsafe_code)]

mod bitpack;

pub mod aead;
pub mod compress;
pub mod dilithium;
pub mod hash;
pub mod kat;
pub mod kyber;

use thiserror::Error;

pub use aead::{aead_open, aead_seal, AeadKey, AeadNonce, AuthFailure};
pub use compress::{compress, decompress, FormatError};
pub use dilithium::{sig_keygen, sign, verify, SigKeyPair, SigScheme, Signature};
pub use hash::{hash, Digest, HashAlgorithm};
pub use kyber::{decaps, encaps, kem_keygen, KemCiphertext, KemKeyPair, KemScheme, SharedSecret};

/// Input-format errors raised by the public-key primitives.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PqcError {
    /// A key or ciphertext does not have the fixed length of its parameter set.
    #[error("{what} must be {expected} bytes, got {actual}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

pub(crate) fn check_len(what: &'static str, bytes: &[u8], expected: usize) -> Result<(), PqcError> {
    if bytes.len() == expected {
        Ok(())
    } else {
        Err(PqcError::InvalidLength {
            what,
            expected,
            actual: bytes.len(),
        })
    }
}
