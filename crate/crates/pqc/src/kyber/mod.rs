//! CRYSTALS-Kyber key encapsulation, parameter set Kyber768 (round 3).
//!
//! Seeds replace the `randombytes` calls of the reference implementation:
//! `kem_keygen` takes `d || z` (64 bytes) and `encaps` takes the 32 bytes that
//! are hashed into the message `m`. With those seeds the outputs match the
//! published known-answer files byte for byte.

mod poly;

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Digest as _, Sha3_256, Sha3_512, Shake256};

use crate::{check_len, PqcError};
use poly::{Poly, POLY_BYTES};

const K: usize = 3;
const DU: u32 = 10;
const DV: u32 = 4;
const POLYVEC_BYTES: usize = K * POLY_BYTES;
const POLYVEC_COMPRESSED_BYTES: usize = K * 320;
const POLY_COMPRESSED_BYTES: usize = 128;

pub const PUBLIC_KEY_BYTES: usize = POLYVEC_BYTES + 32;
pub const SECRET_KEY_BYTES: usize = POLYVEC_BYTES + PUBLIC_KEY_BYTES + 64;
pub const CIPHERTEXT_BYTES: usize = POLYVEC_COMPRESSED_BYTES + POLY_COMPRESSED_BYTES;
pub const SHARED_SECRET_BYTES: usize = 32;

/// Supported KEM parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KemScheme {
    #[default]
    Kyber768,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemKeyPair {
    pub public_key: Vec<u8>,
    pub secret_key: Vec<u8>,
    pub scheme: KemScheme,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemCiphertext {
    pub bytes: Vec<u8>,
    pub scheme: KemScheme,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SharedSecret(pub [u8; SHARED_SECRET_BYTES]);

impl SharedSecret {
    pub fn as_bytes(&self) -> &[u8; SHARED_SECRET_BYTES] {
        &self.0
    }
}

impl std::fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

type PolyVec = [Poly; K];

fn polyvec_to_bytes(v: &PolyVec, out: &mut Vec<u8>) {
    for p in v {
        p.to_bytes(out);
    }
}

fn polyvec_from_bytes(bytes: &[u8]) -> PolyVec {
    std::array::from_fn(|i| Poly::from_bytes(&bytes[i * POLY_BYTES..(i + 1) * POLY_BYTES]))
}

fn inner_product(a: &PolyVec, b: &PolyVec) -> Poly {
    let mut acc = Poly::default();
    for (x, y) in a.iter().zip(b.iter()) {
        acc.add_assign(&x.basemul(y));
    }
    acc
}

/// Row `i` of A (or of A^T when `transposed`), sampled in the NTT domain.
fn matrix_row(rho: &[u8; 32], i: usize, transposed: bool) -> PolyVec {
    std::array::from_fn(|j| {
        let (x, y) = if transposed { (i as u8, j as u8) } else { (j as u8, i as u8) };
        Poly::uniform(rho, x, y)
    })
}

fn sha3_256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha3_256::new();
    for p in parts {
        sha3::Digest::update(&mut h, p);
    }
    h.finalize().into()
}

fn sha3_512(parts: &[&[u8]]) -> ([u8; 32], [u8; 32]) {
    let mut h = Sha3_512::new();
    for p in parts {
        sha3::Digest::update(&mut h, p);
    }
    let out = h.finalize();
    let mut a = [0u8; 32];
    let mut b = [0u8; 32];
    a.copy_from_slice(&out[..32]);
    b.copy_from_slice(&out[32..]);
    (a, b)
}

fn kdf(parts: &[&[u8]]) -> [u8; 32] {
    let mut xof = Shake256::default();
    for p in parts {
        xof.update(p);
    }
    let mut out = [0u8; 32];
    xof.finalize_xof().read(&mut out);
    out
}

fn cpa_keygen(d: &[u8; 32]) -> (Vec<u8>, Vec<u8>) {
    let (rho, sigma) = sha3_512(&[d]);
    let mut s: PolyVec = std::array::from_fn(|i| Poly::noise_eta2(&sigma, i as u8));
    let mut e: PolyVec = std::array::from_fn(|i| Poly::noise_eta2(&sigma, (K + i) as u8));
    for p in s.iter_mut().chain(e.iter_mut()) {
        p.ntt();
    }
    let mut pk = Vec::with_capacity(PUBLIC_KEY_BYTES);
    for (i, e_i) in e.iter().enumerate() {
        let mut t = inner_product(&matrix_row(&rho, i, false), &s);
        t.add_assign(e_i);
        t.to_bytes(&mut pk);
    }
    pk.extend_from_slice(&rho);
    let mut sk = Vec::with_capacity(POLYVEC_BYTES);
    polyvec_to_bytes(&s, &mut sk);
    (pk, sk)
}

fn cpa_encrypt(pk: &[u8], msg: &[u8; 32], coins: &[u8; 32]) -> Vec<u8> {
    let t = polyvec_from_bytes(&pk[..POLYVEC_BYTES]);
    let mut rho = [0u8; 32];
    rho.copy_from_slice(&pk[POLYVEC_BYTES..]);
    let mut r: PolyVec = std::array::from_fn(|i| Poly::noise_eta2(coins, i as u8));
    let e1: PolyVec = std::array::from_fn(|i| Poly::noise_eta2(coins, (K + i) as u8));
    let e2 = Poly::noise_eta2(coins, (2 * K) as u8);
    for p in r.iter_mut() {
        p.ntt();
    }
    let mut ct = Vec::with_capacity(CIPHERTEXT_BYTES);
    for (i, e1_i) in e1.iter().enumerate() {
        let mut u = inner_product(&matrix_row(&rho, i, true), &r);
        u.inv_ntt();
        u.add_assign(e1_i);
        u.compress(DU, &mut ct);
    }
    let mut v = inner_product(&t, &r);
    v.inv_ntt();
    v.add_assign(&e2);
    v.add_assign(&Poly::from_message(msg));
    v.compress(DV, &mut ct);
    ct
}

fn cpa_decrypt(sk: &[u8], ct: &[u8]) -> [u8; 32] {
    let mut u: PolyVec = std::array::from_fn(|i| Poly::decompress(&ct[i * 320..(i + 1) * 320], DU));
    let v = Poly::decompress(&ct[POLYVEC_COMPRESSED_BYTES..], DV);
    let s = polyvec_from_bytes(sk);
    for p in u.iter_mut() {
        p.ntt();
    }
    let mut su = inner_product(&s, &u);
    su.inv_ntt();
    v.sub(&su).to_message()
}

/// Deterministic key generation from `d || z`.
pub fn kem_keygen(seed: &[u8; 64]) -> KemKeyPair {
    let mut d = [0u8; 32];
    d.copy_from_slice(&seed[..32]);
    let (pk, mut sk) = cpa_keygen(&d);
    sk.extend_from_slice(&pk);
    sk.extend_from_slice(&sha3_256(&[&pk]));
    sk.extend_from_slice(&seed[32..]);
    KemKeyPair {
        public_key: pk,
        secret_key: sk,
        scheme: KemScheme::Kyber768,
    }
}

pub fn encaps(public_key: &[u8], seed: &[u8; 32]) -> Result<(KemCiphertext, SharedSecret), PqcError> {
    check_len("Kyber768 public key", public_key, PUBLIC_KEY_BYTES)?;
    let m = sha3_256(&[seed]);
    let (kbar, coins) = sha3_512(&[&m, &sha3_256(&[public_key])]);
    let ct = cpa_encrypt(public_key, &m, &coins);
    let ss = kdf(&[&kbar, &sha3_256(&[&ct])]);
    Ok((
        KemCiphertext {
            bytes: ct,
            scheme: KemScheme::Kyber768,
        },
        SharedSecret(ss),
    ))
}

/// Decapsulation with implicit rejection: a ciphertext that does not
/// re-encrypt identically yields a pseudorandom secret derived from `z`.
pub fn decaps(secret_key: &[u8], ciphertext: &[u8]) -> Result<SharedSecret, PqcError> {
    check_len("Kyber768 secret key", secret_key, SECRET_KEY_BYTES)?;
    check_len("Kyber768 ciphertext", ciphertext, CIPHERTEXT_BYTES)?;
    let sk_cpa = &secret_key[..POLYVEC_BYTES];
    let pk = &secret_key[POLYVEC_BYTES..POLYVEC_BYTES + PUBLIC_KEY_BYTES];
    let h_pk = &secret_key[POLYVEC_BYTES + PUBLIC_KEY_BYTES..SECRET_KEY_BYTES - 32];
    let z = &secret_key[SECRET_KEY_BYTES - 32..];
    let m = cpa_decrypt(sk_cpa, ciphertext);
    let (kbar, coins) = sha3_512(&[&m, h_pk]);
    let reencrypted = cpa_encrypt(pk, &m, &coins);
    let diff = reencrypted
        .iter()
        .zip(ciphertext.iter())
        .fold(0u8, |acc, (a, b)| acc | (a ^ b));
    let prefix: &[u8] = if diff == 0 { &kbar } else { z };
    Ok(SharedSecret(kdf(&[prefix, &sha3_256(&[ciphertext])])))
}
