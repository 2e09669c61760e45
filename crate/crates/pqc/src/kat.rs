//! Known-answer-test support: the response-file format and the AES-256
//! CTR_DRBG that the reference generators use as `randombytes`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes256;

use crate::{dilithium, kyber};

/// One `label = hex` group from a response file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KatEntry {
    fields: BTreeMap<String, String>,
}

impl KatEntry {
    /// Raw field text, for non-hex values such as `count` or `mlen`.
    pub fn text(&self, label: &str) -> Option<&str> {
        self.fields.get(label).map(String::as_str)
    }

    pub fn bytes(&self, label: &str) -> Option<Vec<u8>> {
        decode_hex(self.text(label)?)
    }
}

fn decode_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

/// Parses a response file. Lines starting with `#` are ignored; groups are
/// separated by blank lines; `label=value` and `label = value` are both
/// accepted.
pub fn parse_rsp(text: &str) -> Vec<KatEntry> {
    let mut entries = Vec::new();
    let mut current = KatEntry::default();
    for line in text.lines().map(str::trim) {
        if line.is_empty() {
            if !current.fields.is_empty() {
                entries.push(std::mem::take(&mut current));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if let Some((label, value)) = line.split_once('=') {
            current.fields.insert(label.trim().to_string(), value.trim().to_string());
        }
    }
    if !current.fields.is_empty() {
        entries.push(current);
    }
    entries
}

/// NIST AES-256 CTR_DRBG without derivation function or reseeding, as used by
/// the KAT generators shipped with the CRYSTALS submissions.
pub struct CtrDrbg {
    key: [u8; 32],
    v: [u8; 16],
}

impl CtrDrbg {
    pub fn new(entropy: &[u8; 48]) -> Self {
        let mut drbg = CtrDrbg {
            key: [0; 32],
            v: [0; 16],
        };
        drbg.update(Some(entropy));
        drbg
    }

    fn increment_v(&mut self) {
        for b in self.v.iter_mut().rev() {
            *b = b.wrapping_add(1);
            if *b != 0 {
                break;
            }
        }
    }

    fn block(&mut self) -> [u8; 16] {
        self.increment_v();
        let cipher = Aes256::new(&self.key.into());
        let mut block = self.v.into();
        cipher.encrypt_block(&mut block);
        block.into()
    }

    fn update(&mut self, provided: Option<&[u8; 48]>) {
        let mut temp = [0u8; 48];
        for chunk in temp.chunks_exact_mut(16) {
            chunk.copy_from_slice(&self.block());
        }
        if let Some(p) = provided {
            for (t, x) in temp.iter_mut().zip(p.iter()) {
                *t ^= x;
            }
        }
        self.key.copy_from_slice(&temp[..32]);
        self.v.copy_from_slice(&temp[32..]);
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(16) {
            let block = self.block();
            chunk.copy_from_slice(&block[..chunk.len()]);
        }
        self.update(None);
    }

    pub fn bytes<const LEN: usize>(&mut self) -> [u8; LEN] {
        let mut out = [0u8; LEN];
        self.fill(&mut out);
        out
    }
}

fn hex_line(out: &mut String, label: &str, bytes: &[u8]) {
    out.push_str(label);
    out.push_str(" = ");
    for b in bytes {
        let _ = write!(out, "{b:02X}");
    }
    out.push('\n');
}

fn kat_entropy() -> [u8; 48] {
    std::array::from_fn(|i| i as u8)
}

fn kem_entry(out: &mut String, count: usize, seed: &[u8; 48]) {
    let _ = writeln!(out, "count = {count}");
    hex_line(out, "seed", seed);
    let mut drbg = CtrDrbg::new(seed);
    // keypair draws d and z with two separate randombytes calls.
    let d: [u8; 32] = drbg.bytes();
    let z: [u8; 32] = drbg.bytes();
    let mut seed64 = [0u8; 64];
    seed64[..32].copy_from_slice(&d);
    seed64[32..].copy_from_slice(&z);
    let kp = kyber::kem_keygen(&seed64);
    hex_line(out, "pk", &kp.public_key);
    hex_line(out, "sk", &kp.secret_key);
    let (ct, ss) = kyber::encaps(&kp.public_key, &drbg.bytes()).expect("fresh public key");
    hex_line(out, "ct", &ct.bytes);
    hex_line(out, "ss", ss.as_bytes());
}

fn sign_entry(out: &mut String, count: usize, seed: &[u8; 48], msg: &[u8]) {
    let _ = writeln!(out, "count = {count}");
    hex_line(out, "seed", seed);
    let _ = writeln!(out, "mlen = {}", msg.len());
    hex_line(out, "msg", msg);
    let mut drbg = CtrDrbg::new(seed);
    let kp = dilithium::sig_keygen(&drbg.bytes());
    hex_line(out, "pk", &kp.public_key);
    hex_line(out, "sk", &kp.secret_key);
    let mut sm = dilithium::sign(&kp.secret_key, msg).expect("fresh secret key").bytes;
    sm.extend_from_slice(msg);
    let _ = writeln!(out, "smlen = {}", sm.len());
    hex_line(out, "sm", &sm);
}

/// Regenerates the first `entries` groups of the Kyber768 response file,
/// including its `# Kyber768` header.
pub fn kem_response_file(entries: usize) -> String {
    let mut drbg = CtrDrbg::new(&kat_entropy());
    let seeds: Vec<[u8; 48]> = (0..entries).map(|_| drbg.bytes()).collect();
    let mut out = String::from("# Kyber768\n\n");
    for (i, seed) in seeds.iter().enumerate() {
        kem_entry(&mut out, i, seed);
        out.push('\n');
    }
    out
}

/// Regenerates the first `entries` groups of the Dilithium3 response file.
/// Entry `i` signs a message of `33 * (i + 1)` bytes.
pub fn sign_response_file(entries: usize) -> String {
    let mut drbg = CtrDrbg::new(&kat_entropy());
    let inputs: Vec<([u8; 48], Vec<u8>)> = (0..entries)
        .map(|i| {
            let seed = drbg.bytes();
            let mut msg = vec![0u8; 33 * (i + 1)];
            drbg.fill(&mut msg);
            (seed, msg)
        })
        .collect();
    let mut out = String::from("# Dilithium3\n\n");
    for (i, (seed, msg)) in inputs.iter().enumerate() {
        sign_entry(&mut out, i, seed, msg);
        out.push('\n');
    }
    out
}

/// The single-vector transcript printed by the PQClean `nistkat` harness,
/// whose SHA-256 is published per scheme.
pub fn kem_single_vector() -> String {
    let mut drbg = CtrDrbg::new(&kat_entropy());
    let mut out = String::new();
    kem_entry(&mut out, 0, &drbg.bytes());
    out
}

pub fn sign_single_vector() -> String {
    let mut drbg = CtrDrbg::new(&kat_entropy());
    let seed = drbg.bytes();
    let msg: [u8; 33] = drbg.bytes();
    let mut out = String::new();
    sign_entry(&mut out, 0, &seed, &msg);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_separator_styles() {
        let text = "# header\n\ncount = 0\nseed = 00FF\n\ncount=1\nseed=AB\n";
        let e = parse_rsp(text);
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].text("count"), Some("0"));
        assert_eq!(e[0].bytes("seed"), Some(vec![0x00, 0xff]));
        assert_eq!(e[1].bytes("seed"), Some(vec![0xab]));
        assert_eq!(e[1].bytes("missing"), None);
    }

    #[test]
    fn drbg_first_seed_matches_published_kat_header() {
        // Every CRYSTALS KAT file starts with this seed for count = 0.
        let mut entropy = [0u8; 48];
        for (i, b) in entropy.iter_mut().enumerate() {
            *b = i as u8;
        }
        let mut drbg = CtrDrbg::new(&entropy);
        let seed: [u8; 48] = drbg.bytes();
        let hex: String = seed.iter().map(|b| format!("{b:02X}")).collect();
        assert_eq!(
            hex,
            "061550234D158C5EC95595FE04EF7A25767F2E24CC2BC479D09D86DC9ABCFDE7056A8C266F9EF97ED08541DBD2E1FFA1"
        );
    }
}
