use proptest::prelude::*;
use qgp_pqc::kyber::CIPHERTEXT_BYTES;
use qgp_pqc::{
    aead_open, aead_seal, compress, decaps, decompress, encaps, hash, kem_keygen, sig_keygen, sign, verify, AeadKey,
    AeadNonce, AuthFailure, HashAlgorithm,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[test]
fn sign_verify_roundtrip_1000_messages() {
    let mut r = rng(1);
    for k in 0..10 {
        let kp = sig_keygen(&r.gen());
        for _ in 0..100 {
            let len = r.gen_range(0..200);
            let mut m = vec![0u8; len];
            r.fill_bytes(&mut m);
            let sig = sign(&kp.secret_key, &m).unwrap();
            assert!(verify(&kp.public_key, &m, &sig.bytes).unwrap(), "keypair {k}");
        }
    }
}

#[test]
fn single_bit_flip_rejected_1000_trials() {
    let mut r = rng(2);
    let kp = sig_keygen(&r.gen());
    for trial in 0..1000 {
        let mut m = vec![0u8; r.gen_range(1..64)];
        r.fill_bytes(&mut m);
        let mut sig = sign(&kp.secret_key, &m).unwrap().bytes;
        if trial % 2 == 0 {
            let bit = r.gen_range(0..m.len() * 8);
            m[bit / 8] ^= 1 << (bit % 8);
        } else {
            let bit = r.gen_range(0..sig.len() * 8);
            sig[bit / 8] ^= 1 << (bit % 8);
        }
        assert!(!verify(&kp.public_key, &m, &sig).unwrap(), "trial {trial}");
    }
}

#[test]
fn distinct_seeds_give_distinct_public_keys() {
    let mut r = rng(3);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..100 {
        assert!(seen.insert(sig_keygen(&r.gen()).public_key));
    }
}

#[test]
fn kem_roundtrip_100_keypairs() {
    let mut r = rng(4);
    for _ in 0..100 {
        let mut seed = [0u8; 64];
        r.fill_bytes(&mut seed);
        let kp = kem_keygen(&seed);
        let (ct, ss) = encaps(&kp.public_key, &r.gen()).unwrap();
        assert_eq!(decaps(&kp.secret_key, &ct.bytes).unwrap(), ss);
    }
}

#[test]
fn kem_bit_flip_triggers_implicit_rejection() {
    let mut r = rng(5);
    for _ in 0..100 {
        let mut seed = [0u8; 64];
        r.fill_bytes(&mut seed);
        let kp = kem_keygen(&seed);
        let (ct, ss) = encaps(&kp.public_key, &r.gen()).unwrap();
        let mut bad = ct.bytes.clone();
        let bit = r.gen_range(0..CIPHERTEXT_BYTES * 8);
        bad[bit / 8] ^= 1 << (bit % 8);
        assert_ne!(decaps(&kp.secret_key, &bad).unwrap(), ss);
    }
}

fn unhex(s: &str) -> Vec<u8> {
    hex::decode(s).unwrap()
}

#[test]
fn aes256_gcm_standard_vectors() {
    // Test cases 13, 14 and 16 of the original GCM submission (256-bit key).
    let cases = [
        (
            "0000000000000000000000000000000000000000000000000000000000000000",
            "000000000000000000000000",
            "",
            "",
            "530f8afbc74536b9a963b4f1c4cb738b",
        ),
        (
            "0000000000000000000000000000000000000000000000000000000000000000",
            "000000000000000000000000",
            "",
            "00000000000000000000000000000000",
            "cea7403d4d606b6e074ec5d3baf39d18d0d1c8a799996bf0265b98b5d48ab919",
        ),
        (
            "feffe9928665731c6d6a8f9467308308feffe9928665731c6d6a8f9467308308",
            "cafebabefacedbaddecaf888",
            "feedfacedeadbeeffeedfacedeadbeefabaddad2",
            "d9313225f88406e5a55909c5aff5269a86a7a9531534f7da2e4c303d8a318a721c3c0c95956809532fcf0e2449a6b525b16aedf5aa0de657ba637b39",
            "522dc1f099567d07f47f37a32a84427d643a8cdcbfe5c0c97598a2bd2555d1aa8cb08e48590dbb3da7b08b1056828838c5f61e6393ba7a0abcc9f66276fc6ece0f4e1768cddf8853bb2d551b",
        ),
    ];
    for (k, n, a, p, c) in cases {
        let key = AeadKey(unhex(k).try_into().unwrap());
        let nonce = AeadNonce(unhex(n).try_into().unwrap());
        let ct = aead_seal(&key, &nonce, &unhex(a), &unhex(p));
        assert_eq!(hex::encode(&ct), c);
        assert_eq!(aead_open(&key, &nonce, &unhex(a), &ct).unwrap(), unhex(p));
    }
}

#[test]
fn aead_single_mutations_fail_1000_trials() {
    let mut r = rng(6);
    for trial in 0..1000 {
        let key = AeadKey(r.gen());
        let nonce = AeadNonce(r.gen());
        let mut ad = vec![0u8; r.gen_range(1..32)];
        r.fill_bytes(&mut ad);
        let mut pt = vec![0u8; r.gen_range(0..128)];
        r.fill_bytes(&mut pt);
        let ct = aead_seal(&key, &nonce, &ad, &pt);
        let delta: u8 = r.gen_range(1..=255);
        let result = match trial % 4 {
            0 => {
                let mut bad = ct.clone();
                let i = r.gen_range(0..bad.len());
                bad[i] ^= delta;
                aead_open(&key, &nonce, &ad, &bad)
            }
            1 => {
                let mut bad = ad.clone();
                let i = r.gen_range(0..bad.len());
                bad[i] ^= delta;
                aead_open(&key, &nonce, &bad, &ct)
            }
            2 => {
                let mut bad = nonce;
                bad.0[r.gen_range(0..12)] ^= delta;
                aead_open(&key, &bad, &ad, &ct)
            }
            _ => {
                let mut bad = key.clone();
                bad.0[r.gen_range(0..32)] ^= delta;
                aead_open(&bad, &nonce, &ad, &ct)
            }
        };
        assert_eq!(result, Err(AuthFailure), "trial {trial}");
    }
}

#[test]
fn compress_roundtrip_10k_random_strings() {
    let mut r = rng(7);
    for _ in 0..10_000 {
        let len = r.gen_range(0..512);
        let mut data = vec![0u8; len];
        // Mix incompressible and repetitive content.
        if r.gen_bool(0.5) {
            r.fill_bytes(&mut data);
        } else {
            let alphabet = r.gen_range(1..8u8);
            data.iter_mut().for_each(|b| *b = r.gen_range(0..alphabet));
        }
        assert_eq!(decompress(&compress(&data)).unwrap(), data);
    }
}

#[test]
fn compress_large_inputs() {
    let mut r = rng(8);
    let mut data = vec![0u8; 1 << 20];
    r.fill_bytes(&mut data);
    assert_eq!(decompress(&compress(&data)).unwrap(), data);

    let repeated = vec![0x41u8; 1 << 20];
    let c = compress(&repeated);
    assert!(c.len() * 100 < repeated.len(), "compressed to {} bytes", c.len());
    assert_eq!(decompress(&c).unwrap(), repeated);
}

#[test]
fn truncated_streams_are_format_errors() {
    let mut r = rng(9);
    let mut data = vec![0u8; 4096];
    r.fill_bytes(&mut data[..2048]);
    let c = compress(&data);
    for cut in [0, 1, c.len() / 2, c.len() - 1] {
        assert!(decompress(&c[..cut]).is_err(), "cut {cut}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hash_is_deterministic(m in proptest::collection::vec(any::<u8>(), 0..300)) {
        for alg in [HashAlgorithm::Sha2_256, HashAlgorithm::Sha3_256] {
            let d = hash(&m, alg);
            prop_assert_eq!(d, hash(&m, alg));
            prop_assert_eq!(d.algorithm(), alg);
            prop_assert_eq!(d.as_bytes().len(), 32);
        }
    }

    #[test]
    fn aead_open_inverts_seal(key in any::<[u8; 32]>(), nonce in any::<[u8; 12]>(),
                              ad in proptest::collection::vec(any::<u8>(), 0..64),
                              pt in proptest::collection::vec(any::<u8>(), 0..256)) {
        let (key, nonce) = (AeadKey(key), AeadNonce(nonce));
        let ct = aead_seal(&key, &nonce, &ad, &pt);
        prop_assert_eq!(aead_open(&key, &nonce, &ad, &ct).unwrap(), pt);
    }

    #[test]
    fn decompress_inverts_compress(data in proptest::collection::vec(any::<u8>(), 0..2048)) {
        prop_assert_eq!(decompress(&compress(&data)).unwrap(), data);
    }

    #[test]
    fn decompress_never_panics(data in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decompress(&data);
    }

    #[test]
    fn verify_never_traps_on_garbage(sig in proptest::collection::vec(any::<u8>(), 3293..=3293), m in proptest::collection::vec(any::<u8>(), 0..16)) {
        let kp = sig_keygen(&[11u8; 32]);
        prop_assert!(!verify(&kp.public_key, &m, &sig).unwrap());
    }
}
