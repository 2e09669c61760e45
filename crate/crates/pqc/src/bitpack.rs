//! Little-endian bit packing shared by the lattice encodings.
//!
//! Both Kyber and Dilithium serialise coefficient vectors as a continuous
//! LSB-first bit stream of fixed-width words.

pub(crate) fn pack(values: &[u32], bits: u32, out: &mut Vec<u8>) {
    debug_assert!(bits > 0 && bits <= 24);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mask = (1u64 << bits) - 1;
    for &v in values {
        acc |= (u64::from(v) & mask) << filled;
        filled += bits;
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
}

pub(crate) fn unpack(bytes: &[u8], bits: u32, out: &mut [u32]) {
    debug_assert_eq!(bytes.len() * 8, out.len() * bits as usize);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mask = (1u64 << bits) - 1;
    let mut input = bytes.iter();
    for slot in out.iter_mut() {
        while filled < bits {
            // Length is asserted above, so the stream never runs dry.
            acc |= u64::from(*input.next().unwrap_or(&0)) << filled;
            filled += 8;
        }
        *slot = (acc & mask) as u32;
        acc >>= bits;
        filled -= bits;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_bit_layout_matches_reference_formula() {
        let t = [0x3ABu32, 0x155, 0x2CC, 0x0F1];
        let mut out = Vec::new();
        pack(&t, 10, &mut out);
        let expect = [
            t[0] as u8,
            ((t[0] >> 8) | (t[1] << 2)) as u8,
            ((t[1] >> 6) | (t[2] << 4)) as u8,
            ((t[2] >> 4) | (t[3] << 6)) as u8,
            (t[3] >> 2) as u8,
        ];
        assert_eq!(out, expect);
        let mut back = [0u32; 4];
        unpack(&out, 10, &mut back);
        assert_eq!(back, t);
    }

    #[test]
    fn roundtrip_all_widths() {
        for bits in [1u32, 3, 4, 10, 12, 13, 20] {
            let values: Vec<u32> = (0..64u32).map(|i| i.wrapping_mul(2654435761) & ((1 << bits) - 1)).collect();
            let mut out = Vec::new();
            pack(&values, bits, &mut out);
            assert_eq!(out.len(), 64 * bits as usize / 8);
            let mut back = vec![0u32; 64];
            unpack(&out, bits, &mut back);
            assert_eq!(back, values);
        }
    }
}
