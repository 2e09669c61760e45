//! Bit strings are stored one bit per byte (`0` or `1`); these helpers convert
//! to and from packed bytes, most significant bit first.

pub fn pack_msb(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (7 - i % 8);
    }
    out
}

pub fn unpack_msb(bytes: &[u8], n_bits: usize) -> Vec<u8> {
    (0..n_bits).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

pub fn parity(bits: impl IntoIterator<Item = u8>) -> u8 {
    bits.into_iter().fold(0, |acc, b| acc ^ (b & 1))
}
