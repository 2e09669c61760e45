//! CRYSTALS-Dilithium signatures, parameter set Dilithium3 (round 3.1).
//!
//! Signing is deterministic. Key generation takes the 32-byte seed the
//! reference implementation draws from `randombytes`.

mod poly;

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::{bitpack, check_len, PqcError};
use poly::{centered, from_signed, Poly, N, Q};

const K: usize = 6;
const L: usize = 5;
const ETA: u32 = 4;
const TAU: usize = 49;
const BETA: i32 = 196;
const GAMMA1: i32 = 1 << 19;
const GAMMA2: i32 = ((Q - 1) / 32) as i32;
const OMEGA: usize = 55;
const D: u32 = 13;

const SEED_BYTES: usize = 32;
const T1_BYTES: usize = N * 10 / 8;
const T0_BYTES: usize = N * 13 / 8;
const ETA_BYTES: usize = N * 4 / 8;
const Z_BYTES: usize = N * 20 / 8;
const W1_BYTES: usize = N * 4 / 8;

pub const PUBLIC_KEY_BYTES: usize = SEED_BYTES + K * T1_BYTES;
pub const SECRET_KEY_BYTES: usize = 3 * SEED_BYTES + (L + K) * ETA_BYTES + K * T0_BYTES;
pub const SIGNATURE_BYTES: usize = SEED_BYTES + L * Z_BYTES + OMEGA + K;

/// Supported signature parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SigScheme {
    #[default]
    Dilithium3,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigKeyPair {
    pub public_key: Vec<u8>,
    pub secret_key: Vec<u8>,
    pub scheme: SigScheme,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub bytes: Vec<u8>,
    pub scheme: SigScheme,
}

impl AsRef<[u8]> for Signature {
    fn as_ref(&self) -> &[u8] {
        &self.bytes
    }
}

fn shake256<const OUT: usize>(parts: &[&[u8]]) -> [u8; OUT] {
    let mut xof = Shake256::default();
    for p in parts {
        xof.update(p);
    }
    let mut out = [0u8; OUT];
    xof.finalize_xof().read(&mut out);
    out
}

fn expand_matrix(rho: &[u8; 32]) -> Vec<[Poly; L]> {
    (0..K)
        .map(|i| std::array::from_fn(|j| Poly::uniform(rho, ((i << 8) + j) as u16)))
        .collect()
}

/// `A * v` for NTT-domain inputs, returned in the normal domain.
fn mat_vec(a: &[[Poly; L]], v: &[Poly; L]) -> Vec<Poly> {
    a.iter()
        .map(|row| {
            let mut acc = Poly::default();
            for (x, y) in row.iter().zip(v.iter()) {
                acc.add_assign(&x.pointwise(y));
            }
            acc.inv_ntt();
            acc
        })
        .collect()
}

fn ntt_all(v: &[Poly]) -> Vec<Poly> {
    v.iter()
        .map(|p| {
            let mut p = p.clone();
            p.ntt();
            p
        })
        .collect()
}

/// `c * v` with `c_hat` in the NTT domain, result in the normal domain.
fn scale(c_hat: &Poly, v_hat: &[Poly]) -> Vec<Poly> {
    v_hat
        .iter()
        .map(|p| {
            let mut r = c_hat.pointwise(p);
            r.inv_ntt();
            r
        })
        .collect()
}

fn power2round(a: u32) -> (u32, i32) {
    let a1 = (a + (1 << (D - 1)) - 1) >> D;
    (a1, a as i32 - (a1 << D) as i32)
}

/// Splits `a` into `a1 * 2*gamma2 + a0` with centered `a0`.
fn decompose(a: u32) -> (u32, i32) {
    let mut a1 = (a + 127) >> 7;
    a1 = ((a1 * 1025 + (1 << 21)) >> 22) & 15;
    let mut a0 = a as i32 - (a1 as i32) * 2 * GAMMA2;
    if a0 > ((Q - 1) / 2) as i32 {
        a0 -= Q as i32;
    }
    (a1, a0)
}

fn make_hint(a0: i32, a1: u32) -> bool {
    a0 > GAMMA2 || a0 < -GAMMA2 || (a0 == -GAMMA2 && a1 != 0)
}

fn use_hint(a: u32, hint: bool) -> u32 {
    let (a1, a0) = decompose(a);
    if !hint {
        a1
    } else if a0 > 0 {
        (a1 + 1) & 15
    } else {
        a1.wrapping_sub(1) & 15
    }
}

fn pack_w1(w1: &[[u32; N]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(K * W1_BYTES);
    for p in w1 {
        bitpack::pack(p, 4, &mut out);
    }
    out
}

fn pack_offset(p: &Poly, offset: i32, bits: u32, out: &mut Vec<u8>) {
    let words: Vec<u32> = p.0.iter().map(|&c| (offset - centered(c)) as u32).collect();
    bitpack::pack(&words, bits, out);
}

fn unpack_offset(bytes: &[u8], offset: i32, bits: u32) -> Poly {
    let mut words = [0u32; N];
    bitpack::unpack(bytes, bits, &mut words);
    let mut p = Poly::default();
    for (c, w) in p.0.iter_mut().zip(words) {
        *c = from_signed(offset - w as i32);
    }
    p
}

/// Deterministic key generation from a 32-byte seed.
pub fn sig_keygen(seed: &[u8; 32]) -> SigKeyPair {
    let expanded: [u8; 128] = shake256(&[seed]);
    let rho: [u8; 32] = expanded[..32].try_into().expect("32 bytes");
    let rho_prime: [u8; 64] = expanded[32..96].try_into().expect("64 bytes");
    let key = &expanded[96..];

    let a = expand_matrix(&rho);
    let s1: [Poly; L] = std::array::from_fn(|i| Poly::uniform_eta4(&rho_prime, i as u16));
    let s2: Vec<Poly> = (0..K).map(|i| Poly::uniform_eta4(&rho_prime, (L + i) as u16)).collect();
    let s1_hat: [Poly; L] = ntt_all(&s1).try_into().expect("L polys");
    let mut t = mat_vec(&a, &s1_hat);
    for (ti, s2i) in t.iter_mut().zip(s2.iter()) {
        ti.add_assign(s2i);
    }

    let mut pk = Vec::with_capacity(PUBLIC_KEY_BYTES);
    pk.extend_from_slice(&rho);
    let mut t0_bytes = Vec::with_capacity(K * T0_BYTES);
    for ti in &t {
        let mut t1 = [0u32; N];
        let mut t0 = Poly::default();
        for (j, &c) in ti.0.iter().enumerate() {
            let (hi, lo) = power2round(c);
            t1[j] = hi;
            t0.0[j] = from_signed(lo);
        }
        bitpack::pack(&t1, 10, &mut pk);
        pack_offset(&t0, 1 << (D - 1), 13, &mut t0_bytes);
    }
    let tr: [u8; 32] = shake256(&[&pk]);

    let mut sk = Vec::with_capacity(SECRET_KEY_BYTES);
    sk.extend_from_slice(&rho);
    sk.extend_from_slice(key);
    sk.extend_from_slice(&tr);
    for p in s1.iter().chain(s2.iter()) {
        pack_offset(p, ETA as i32, 4, &mut sk);
    }
    sk.extend_from_slice(&t0_bytes);
    SigKeyPair {
        public_key: pk,
        secret_key: sk,
        scheme: SigScheme::Dilithium3,
    }
}

pub fn sign(secret_key: &[u8], message: &[u8]) -> Result<Signature, PqcError> {
    check_len("Dilithium3 secret key", secret_key, SECRET_KEY_BYTES)?;
    let rho: [u8; 32] = secret_key[..32].try_into().expect("32 bytes");
    let key = &secret_key[32..64];
    let tr = &secret_key[64..96];
    let mut off = 96;
    let mut next = |len: usize| {
        let s = &secret_key[off..off + len];
        off += len;
        s
    };
    let s1: Vec<Poly> = (0..L).map(|_| unpack_offset(next(ETA_BYTES), ETA as i32, 4)).collect();
    let s2: Vec<Poly> = (0..K).map(|_| unpack_offset(next(ETA_BYTES), ETA as i32, 4)).collect();
    let t0: Vec<Poly> = (0..K).map(|_| unpack_offset(next(T0_BYTES), 1 << (D - 1), 13)).collect();

    let mu: [u8; 64] = shake256(&[tr, message]);
    let rho_prime: [u8; 64] = shake256(&[key, &mu]);
    let a = expand_matrix(&rho);
    let (s1_hat, s2_hat, t0_hat) = (ntt_all(&s1), ntt_all(&s2), ntt_all(&t0));

    let mut nonce: u16 = 0;
    loop {
        let y: [Poly; L] = std::array::from_fn(|i| Poly::uniform_gamma1(&rho_prime, (L as u16).wrapping_mul(nonce).wrapping_add(i as u16)));
        nonce = nonce.wrapping_add(1);
        let y_hat: [Poly; L] = ntt_all(&y).try_into().expect("L polys");
        let w = mat_vec(&a, &y_hat);

        let mut w1 = vec![[0u32; N]; K];
        let mut w0 = vec![[0i32; N]; K];
        for (i, wi) in w.iter().enumerate() {
            for (j, &c) in wi.0.iter().enumerate() {
                (w1[i][j], w0[i][j]) = decompose(c);
            }
        }
        let c_tilde: [u8; 32] = shake256(&[&mu, &pack_w1(&w1)]);
        let mut c_hat = Poly::challenge(&c_tilde, TAU);
        c_hat.ntt();

        let mut z = scale(&c_hat, &s1_hat);
        for (zi, yi) in z.iter_mut().zip(y.iter()) {
            zi.add_assign(yi);
        }
        if z.iter().any(|p| p.exceeds(GAMMA1 - BETA)) {
            continue;
        }

        let cs2 = scale(&c_hat, &s2_hat);
        let ct0 = scale(&c_hat, &t0_hat);
        if ct0.iter().any(|p| p.exceeds(GAMMA2)) {
            continue;
        }
        let mut low_ok = true;
        let mut hints = vec![[false; N]; K];
        let mut hint_count = 0;
        for i in 0..K {
            for j in 0..N {
                let r0 = w0[i][j] - centered(cs2[i].0[j]);
                if r0.abs() >= GAMMA2 - BETA {
                    low_ok = false;
                }
                let h = make_hint(r0 + centered(ct0[i].0[j]), w1[i][j]);
                hints[i][j] = h;
                hint_count += usize::from(h);
            }
        }
        if !low_ok || hint_count > OMEGA {
            continue;
        }

        let mut sig = Vec::with_capacity(SIGNATURE_BYTES);
        sig.extend_from_slice(&c_tilde);
        for zi in &z {
            pack_offset(zi, GAMMA1, 20, &mut sig);
        }
        let mut hint_bytes = [0u8; OMEGA + K];
        let mut k = 0;
        for (i, row) in hints.iter().enumerate() {
            for (j, &h) in row.iter().enumerate() {
                if h {
                    hint_bytes[k] = j as u8;
                    k += 1;
                }
            }
            hint_bytes[OMEGA + i] = k as u8;
        }
        sig.extend_from_slice(&hint_bytes);
        return Ok(Signature {
            bytes: sig,
            scheme: SigScheme::Dilithium3,
        });
    }
}

/// Strict hint decoding: positions strictly increase within a polynomial and
/// unused slots are zero.
fn unpack_hints(bytes: &[u8]) -> Option<Vec<[bool; N]>> {
    let mut hints = vec![[false; N]; K];
    let mut k = 0usize;
    for (i, row) in hints.iter_mut().enumerate() {
        let end = usize::from(bytes[OMEGA + i]);
        if end < k || end > OMEGA {
            return None;
        }
        for j in k..end {
            if j > k && bytes[j] <= bytes[j - 1] {
                return None;
            }
            row[usize::from(bytes[j])] = true;
        }
        k = end;
    }
    if bytes[k..OMEGA].iter().any(|&b| b != 0) {
        return None;
    }
    Some(hints)
}

/// Returns `Ok(false)` for any signature that fails to verify, including
/// malformed encodings. Only a wrong-length public key is an error.
pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> Result<bool, PqcError> {
    check_len("Dilithium3 public key", public_key, PUBLIC_KEY_BYTES)?;
    if signature.len() != SIGNATURE_BYTES {
        return Ok(false);
    }
    let rho: [u8; 32] = public_key[..32].try_into().expect("32 bytes");
    let c_tilde = &signature[..SEED_BYTES];
    let z: Vec<Poly> = (0..L)
        .map(|i| {
            let start = SEED_BYTES + i * Z_BYTES;
            unpack_offset(&signature[start..start + Z_BYTES], GAMMA1, 20)
        })
        .collect();
    let Some(hints) = unpack_hints(&signature[SEED_BYTES + L * Z_BYTES..]) else {
        return Ok(false);
    };
    if z.iter().any(|p| p.exceeds(GAMMA1 - BETA)) {
        return Ok(false);
    }

    let tr: [u8; 32] = shake256(&[public_key]);
    let mu: [u8; 64] = shake256(&[&tr, message]);
    let mut c_hat = Poly::challenge(c_tilde, TAU);
    c_hat.ntt();

    let a = expand_matrix(&rho);
    let z_hat: [Poly; L] = ntt_all(&z).try_into().expect("L polys");
    let az = mat_vec(&a, &z_hat);
    let mut w1 = vec![[0u32; N]; K];
    for i in 0..K {
        let start = SEED_BYTES + i * T1_BYTES;
        let mut t1 = Poly::default();
        bitpack::unpack(&public_key[start..start + T1_BYTES], 10, &mut t1.0);
        t1.shift_left(D);
        t1.ntt();
        let mut ct1 = c_hat.pointwise(&t1);
        ct1.inv_ntt();
        let mut w = az[i].clone();
        w.sub_assign(&ct1);
        for j in 0..N {
            w1[i][j] = use_hint(w.0[j], hints[i][j]);
        }
    }
    let expected: [u8; 32] = shake256(&[&mu, &pack_w1(&w1)]);
    Ok(expected == c_tilde)
}
