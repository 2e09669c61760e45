//! Arithmetic in R_q = Z_q[X]/(X^256 + 1), q = 3329.
//!
//! Coefficients are always kept canonical in `[0, q)`. The NTT uses the same
//! bit-reversed output ordering as the reference implementation, which matters
//! because public keys serialise `t` in the NTT domain.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Shake128, Shake256};

use crate::bitpack;

pub(crate) const N: usize = 256;
pub(crate) const Q: u32 = 3329;
pub(crate) const POLY_BYTES: usize = 384;

const fn pow_mod(base: u32, mut exp: u32) -> u32 {
    let mut result = 1u32;
    let mut b = base % Q;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * b % Q;
        }
        b = b * b % Q;
        exp >>= 1;
    }
    result
}

const fn bitrev7(x: u32) -> u32 {
    let mut r = 0;
    let mut i = 0;
    while i < 7 {
        r |= ((x >> i) & 1) << (6 - i);
        i += 1;
    }
    r
}

/// 17^bitrev7(k) mod q; 17 is a primitive 256th root of unity.
const ZETAS: [u32; 128] = {
    let mut z = [0u32; 128];
    let mut k = 0;
    while k < 128 {
        z[k] = pow_mod(17, bitrev7(k as u32));
        k += 1;
    }
    z
};

/// 128^-1 mod q.
const INV_128: u32 = 3303;

#[inline]
fn add(a: u32, b: u32) -> u32 {
    let s = a + b;
    if s >= Q {
        s - Q
    } else {
        s
    }
}

#[inline]
fn sub(a: u32, b: u32) -> u32 {
    add(a, Q - b)
}

#[inline]
fn mul(a: u32, b: u32) -> u32 {
    a * b % Q
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct Poly(pub(crate) [u32; N]);

impl Default for Poly {
    fn default() -> Self {
        Poly([0; N])
    }
}

impl Poly {
    pub(crate) fn ntt(&mut self) {
        let f = &mut self.0;
        let mut k = 1;
        let mut len = 128;
        while len >= 2 {
            let mut start = 0;
            while start < N {
                let zeta = ZETAS[k];
                k += 1;
                for j in start..start + len {
                    let t = mul(zeta, f[j + len]);
                    f[j + len] = sub(f[j], t);
                    f[j] = add(f[j], t);
                }
                start += 2 * len;
            }
            len >>= 1;
        }
    }

    pub(crate) fn inv_ntt(&mut self) {
        let f = &mut self.0;
        let mut k = 127;
        let mut len = 2;
        while len <= 128 {
            let mut start = 0;
            while start < N {
                let zeta = ZETAS[k];
                k -= 1;
                for j in start..start + len {
                    let t = f[j];
                    f[j] = add(t, f[j + len]);
                    f[j + len] = mul(zeta, sub(f[j + len], t));
                }
                start += 2 * len;
            }
            len <<= 1;
        }
        for c in f.iter_mut() {
            *c = mul(*c, INV_128);
        }
    }

    /// Product in the NTT domain: 128 degree-one products modulo X^2 - gamma.
    pub(crate) fn basemul(&self, other: &Poly) -> Poly {
        let (a, b) = (&self.0, &other.0);
        let mut r = [0u32; N];
        for i in 0..64 {
            let gamma = ZETAS[64 + i];
            for (offset, g) in [(4 * i, gamma), (4 * i + 2, Q - gamma)] {
                let (a0, a1, b0, b1) = (a[offset], a[offset + 1], b[offset], b[offset + 1]);
                r[offset] = add(mul(a0, b0), mul(mul(a1, b1), g));
                r[offset + 1] = add(mul(a0, b1), mul(a1, b0));
            }
        }
        Poly(r)
    }

    pub(crate) fn add_assign(&mut self, other: &Poly) {
        for (x, y) in self.0.iter_mut().zip(other.0.iter()) {
            *x = add(*x, *y);
        }
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        let mut r = self.clone();
        for (x, y) in r.0.iter_mut().zip(other.0.iter()) {
            *x = sub(*x, *y);
        }
        r
    }

    pub(crate) fn to_bytes(&self, out: &mut Vec<u8>) {
        bitpack::pack(&self.0, 12, out);
    }

    /// Decodes 12-bit words, reducing values above q as the reference does
    /// implicitly through its lazy arithmetic.
    pub(crate) fn from_bytes(bytes: &[u8]) -> Poly {
        let mut p = Poly::default();
        bitpack::unpack(bytes, 12, &mut p.0);
        for c in p.0.iter_mut() {
            *c %= Q;
        }
        p
    }

    pub(crate) fn compress(&self, d: u32, out: &mut Vec<u8>) {
        let mask = (1u32 << d) - 1;
        let words: Vec<u32> = self.0.iter().map(|&x| (((x << d) + Q / 2) / Q) & mask).collect();
        bitpack::pack(&words, d, out);
    }

    pub(crate) fn decompress(bytes: &[u8], d: u32) -> Poly {
        let mut p = Poly::default();
        bitpack::unpack(bytes, d, &mut p.0);
        for c in p.0.iter_mut() {
            *c = (*c * Q + (1 << (d - 1))) >> d;
        }
        p
    }

    pub(crate) fn from_message(msg: &[u8; 32]) -> Poly {
        let mut p = Poly::default();
        for (i, c) in p.0.iter_mut().enumerate() {
            if (msg[i / 8] >> (i % 8)) & 1 == 1 {
                *c = Q.div_ceil(2);
            }
        }
        p
    }

    pub(crate) fn to_message(&self) -> [u8; 32] {
        let mut msg = [0u8; 32];
        for (i, &x) in self.0.iter().enumerate() {
            let bit = (((x << 1) + Q / 2) / Q) & 1;
            msg[i / 8] |= (bit as u8) << (i % 8);
        }
        msg
    }

    /// Rejection sampling of a uniform NTT-domain polynomial from
    /// SHAKE128(seed || i || j).
    pub(crate) fn uniform(seed: &[u8; 32], i: u8, j: u8) -> Poly {
        let mut xof = Shake128::default();
        xof.update(seed);
        xof.update(&[i, j]);
        let mut reader = xof.finalize_xof();
        let mut p = Poly::default();
        let mut ctr = 0;
        let mut buf = [0u8; 168];
        while ctr < N {
            reader.read(&mut buf);
            for chunk in buf.chunks_exact(3) {
                let d1 = u32::from(chunk[0]) | (u32::from(chunk[1] & 0x0f) << 8);
                let d2 = u32::from(chunk[1] >> 4) | (u32::from(chunk[2]) << 4);
                for d in [d1, d2] {
                    if d < Q && ctr < N {
                        p.0[ctr] = d;
                        ctr += 1;
                    }
                }
            }
        }
        p
    }

    /// Centered binomial sample with eta = 2 from SHAKE256(seed || nonce).
    pub(crate) fn noise_eta2(seed: &[u8; 32], nonce: u8) -> Poly {
        let mut buf = [0u8; 128];
        let mut xof = Shake256::default();
        xof.update(seed);
        xof.update(&[nonce]);
        xof.finalize_xof().read(&mut buf);
        let mut p = Poly::default();
        for (i, word) in buf.chunks_exact(4).enumerate() {
            let t = u32::from_le_bytes([word[0], word[1], word[2], word[3]]);
            let d = (t & 0x5555_5555) + ((t >> 1) & 0x5555_5555);
            for j in 0..8 {
                let a = (d >> (4 * j)) & 3;
                let b = (d >> (4 * j + 2)) & 3;
                p.0[8 * i + j] = sub(a, b);
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schoolbook(a: &Poly, b: &Poly) -> Poly {
        let mut r = [0i64; N];
        for i in 0..N {
            for j in 0..N {
                let prod = i64::from(a.0[i]) * i64::from(b.0[j]);
                if i + j < N {
                    r[i + j] += prod;
                } else {
                    r[i + j - N] -= prod;
                }
            }
        }
        let mut p = Poly::default();
        for (c, v) in p.0.iter_mut().zip(r) {
            *c = v.rem_euclid(i64::from(Q)) as u32;
        }
        p
    }

    fn sample(seed: u32) -> Poly {
        let mut p = Poly::default();
        let mut s = seed;
        for c in p.0.iter_mut() {
            s = s.wrapping_mul(1_103_515_245).wrapping_add(12345);
            *c = (s >> 8) % Q;
        }
        p
    }

    #[test]
    fn reference_zeta_table_in_plain_form() {
        // The reference stores these in Montgomery form; first entries are
        // 17^64 = 1729 and 17^32 = 2580 in plain form.
        assert_eq!(ZETAS[0], 1);
        assert_eq!(ZETAS[1], 1729);
        assert_eq!(ZETAS[2], 2580);
        assert_eq!(pow_mod(17, 128), Q - 1);
    }

    #[test]
    fn ntt_roundtrip() {
        let a = sample(7);
        let mut b = a.clone();
        b.ntt();
        assert_ne!(a, b);
        b.inv_ntt();
        assert_eq!(a, b);
    }

    #[test]
    fn ntt_product_matches_schoolbook() {
        let a = sample(1);
        let b = sample(2);
        let expect = schoolbook(&a, &b);
        let (mut an, mut bn) = (a, b);
        an.ntt();
        bn.ntt();
        let mut prod = an.basemul(&bn);
        prod.inv_ntt();
        assert_eq!(prod, expect);
    }

    #[test]
    fn message_roundtrip_survives_small_noise() {
        let mut msg = [0u8; 32];
        for (i, b) in msg.iter_mut().enumerate() {
            *b = (i as u8).wrapping_mul(37);
        }
        let mut p = Poly::from_message(&msg);
        for (i, c) in p.0.iter_mut().enumerate() {
            *c = if i % 2 == 0 { add(*c, 800) } else { sub(*c, 800) };
        }
        assert_eq!(p.to_message(), msg);
    }

    #[test]
    fn compress_error_is_bounded() {
        let a = sample(9);
        for d in [4u32, 10] {
            let mut bytes = Vec::new();
            a.compress(d, &mut bytes);
            let back = Poly::decompress(&bytes, d);
            let bound = (Q + (1 << d)) / (1 << (d + 1));
            for (x, y) in a.0.iter().zip(back.0.iter()) {
                let diff = (*x as i32 - *y as i32).rem_euclid(Q as i32);
                let dist = diff.min(Q as i32 - diff) as u32;
                assert!(dist <= bound, "d={d} x={x} y={y}");
            }
        }
    }
}
