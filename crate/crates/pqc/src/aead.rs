//! AES-256-GCM with a 128-bit tag appended to the ciphertext.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use thiserror::Error;

/// Supported AEAD ciphers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AeadCipher {
    #[default]
    Aes256Gcm,
}

#[derive(Clone, PartialEq, Eq)]
pub struct AeadKey(pub [u8; 32]);

impl std::fmt::Debug for AeadKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AeadKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AeadNonce(pub [u8; 12]);

/// Authentication failed: wrong key, nonce, associated data, or a modified
/// ciphertext. Deliberately carries no detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("authentication failed")]
pub struct AuthFailure;

pub const TAG_BYTES: usize = 16;

pub fn aead_seal(key: &AeadKey, nonce: &AeadNonce, associated_data: &[u8], plaintext: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new(&key.0.into());
    cipher
        .encrypt(
            Nonce::from_slice(&nonce.0),
            Payload {
                msg: plaintext,
                aad: associated_data,
            },
        )
        // Encryption only fails for inputs beyond the GCM length limit (~64 GiB).
        .expect("plaintext within AES-GCM length limit")
}

pub fn aead_open(
    key: &AeadKey,
    nonce: &AeadNonce,
    associated_data: &[u8],
    ciphertext: &[u8],
) -> Result<Vec<u8>, AuthFailure> {
    let cipher = Aes256Gcm::new(&key.0.into());
    cipher
        .decrypt(
            Nonce::from_slice(&nonce.0),
            Payload {
                msg: ciphertext,
                aad: associated_data,
            },
        )
        .map_err(|_| AuthFailure)
}
