//! Arithmetic in Z_q[X]/(X^256 + 1), q = 8380417, kept canonical in `[0, q)`.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Shake128, Shake256};

use crate::bitpack;

pub(crate) const N: usize = 256;
pub(crate) const Q: u32 = 8_380_417;

const fn pow_mod(base: u64, mut exp: u64) -> u64 {
    let q = Q as u64;
    let mut result = 1u64;
    let mut b = base % q;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * b % q;
        }
        b = b * b % q;
        exp >>= 1;
    }
    result
}

const fn bitrev8(x: u32) -> u32 {
    let mut r = 0;
    let mut i = 0;
    while i < 8 {
        r |= ((x >> i) & 1) << (7 - i);
        i += 1;
    }
    r
}

/// 1753^bitrev8(k) mod q; 1753 is a primitive 512th root of unity.
const ZETAS: [u32; 256] = {
    let mut z = [0u32; 256];
    let mut k = 0;
    while k < 256 {
        z[k] = pow_mod(1753, bitrev8(k as u32) as u64) as u32;
        k += 1;
    }
    z
};

/// 256^-1 mod q.
const INV_256: u32 = 8_347_681;

#[inline]
pub(crate) fn add(a: u32, b: u32) -> u32 {
    let s = a + b;
    if s >= Q {
        s - Q
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub(a: u32, b: u32) -> u32 {
    add(a, Q - b)
}

#[inline]
fn mul(a: u32, b: u32) -> u32 {
    (u64::from(a) * u64::from(b) % u64::from(Q)) as u32
}

/// Representative in `(-(q-1)/2, (q-1)/2]`.
#[inline]
pub(crate) fn centered(a: u32) -> i32 {
    if a > (Q - 1) / 2 {
        a as i32 - Q as i32
    } else {
        a as i32
    }
}

#[inline]
pub(crate) fn from_signed(a: i32) -> u32 {
    a.rem_euclid(Q as i32) as u32
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
        let mut k = 0;
        let mut len = 128;
        while len >= 1 {
            let mut start = 0;
            while start < N {
                k += 1;
                let zeta = ZETAS[k];
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
        let mut k = 256;
        let mut len = 1;
        while len < N {
            let mut start = 0;
            while start < N {
                k -= 1;
                let zeta = ZETAS[k];
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
            *c = mul(*c, INV_256);
        }
    }

    pub(crate) fn pointwise(&self, other: &Poly) -> Poly {
        let mut r = Poly::default();
        for ((r, a), b) in r.0.iter_mut().zip(self.0.iter()).zip(other.0.iter()) {
            *r = mul(*a, *b);
        }
        r
    }

    pub(crate) fn add_assign(&mut self, other: &Poly) {
        for (x, y) in self.0.iter_mut().zip(other.0.iter()) {
            *x = add(*x, *y);
        }
    }

    pub(crate) fn sub_assign(&mut self, other: &Poly) {
        for (x, y) in self.0.iter_mut().zip(other.0.iter()) {
            *x = sub(*x, *y);
        }
    }

    pub(crate) fn shift_left(&mut self, bits: u32) {
        for c in self.0.iter_mut() {
            *c = mul(*c, 1 << bits);
        }
    }

    /// True when some centered coefficient has magnitude at least `bound`.
    pub(crate) fn exceeds(&self, bound: i32) -> bool {
        self.0.iter().any(|&c| centered(c).abs() >= bound)
    }

    /// Uniform NTT-domain sample from SHAKE128(rho || nonce).
    pub(crate) fn uniform(rho: &[u8; 32], nonce: u16) -> Poly {
        let mut xof = Shake128::default();
        xof.update(rho);
        xof.update(&nonce.to_le_bytes());
        let mut reader = xof.finalize_xof();
        let mut p = Poly::default();
        let mut ctr = 0;
        let mut buf = [0u8; 168];
        while ctr < N {
            reader.read(&mut buf);
            for chunk in buf.chunks_exact(3) {
                let t = (u32::from(chunk[0]) | u32::from(chunk[1]) << 8 | u32::from(chunk[2]) << 16) & 0x7F_FFFF;
                if t < Q && ctr < N {
                    p.0[ctr] = t;
                    ctr += 1;
                }
            }
        }
        p
    }

    /// Coefficients in `[-eta, eta]` for eta = 4 by nibble rejection.
    pub(crate) fn uniform_eta4(seed: &[u8; 64], nonce: u16) -> Poly {
        let mut xof = Shake256::default();
        xof.update(seed);
        xof.update(&nonce.to_le_bytes());
        let mut reader = xof.finalize_xof();
        let mut p = Poly::default();
        let mut ctr = 0;
        let mut buf = [0u8; 136];
        while ctr < N {
            reader.read(&mut buf);
            for &b in &buf {
                for t in [u32::from(b & 0x0F), u32::from(b >> 4)] {
                    if t < 9 && ctr < N {
                        p.0[ctr] = sub(4, t);
                        ctr += 1;
                    }
                }
            }
        }
        p
    }

    /// Masking polynomial with coefficients in `(-2^19, 2^19]`.
    pub(crate) fn uniform_gamma1(seed: &[u8; 64], nonce: u16) -> Poly {
        let mut xof = Shake256::default();
        xof.update(seed);
        xof.update(&nonce.to_le_bytes());
        let mut buf = [0u8; 640];
        xof.finalize_xof().read(&mut buf);
        let mut p = Poly::default();
        bitpack::unpack(&buf, 20, &mut p.0);
        for c in p.0.iter_mut() {
            *c = sub(1 << 19, *c);
        }
        p
    }

    /// Challenge with exactly `tau` coefficients equal to +-1.
    pub(crate) fn challenge(seed: &[u8], tau: usize) -> Poly {
        let mut xof = Shake256::default();
        xof.update(seed);
        let mut reader = xof.finalize_xof();
        let mut sign_bytes = [0u8; 8];
        reader.read(&mut sign_bytes);
        let mut signs = u64::from_le_bytes(sign_bytes);
        let mut c = Poly::default();
        for i in N - tau..N {
            let b = loop {
                let mut byte = [0u8; 1];
                reader.read(&mut byte);
                if usize::from(byte[0]) <= i {
                    break usize::from(byte[0]);
                }
            };
            c.0[i] = c.0[b];
            c.0[b] = if signs & 1 == 1 { Q - 1 } else { 1 };
            signs >>= 1;
        }
        c
    }
}
