//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use qgp_core::codec::{seal, LayerFlags, OpenKeys, ReplayRegistry, SealContext};
use qgp_core::qkd::SessionKeyMaterial;
use qgp_pqc::{kem_keygen, sig_keygen, HashAlgorithm, KemKeyPair, SigKeyPair};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const GOLDEN_MESSAGE: &[u8] = b"hello";
pub const GOLDEN_NONCE_SEED: u64 = 0x5147_5031;

pub struct Parties {
    pub signer: SigKeyPair,
    pub kem: KemKeyPair,
    pub session: SessionKeyMaterial,
}

pub fn parties() -> Parties {
    let sig_seed: [u8; 32] = std::array::from_fn(|i| i as u8);
    let kem_seed: [u8; 64] = std::array::from_fn(|i| 0x80 | i as u8);
    Parties {
        signer: sig_keygen(&sig_seed),
        kem: kem_keygen(&kem_seed),
        session: SessionKeyMaterial {
            key_id: std::array::from_fn(|i| 0xa0 + i as u8),
            key_bits: (0..256).map(|i| ((i * 5 + 1) % 7 < 3) as u8).collect(),
            qber: 0.0,
            leaked_bits: 0,
        },
    }
}

impl Parties {
    pub fn context(&self, layers: LayerFlags) -> SealContext<'_> {
        SealContext {
            signer: &self.signer.secret_key,
            session_key: layers.qkd.then_some(&self.session),
            recipient_kem_public: layers.kyber.then_some(&self.kem.public_key[..]),
            hash_algorithm: HashAlgorithm::Sha3_256,
        }
    }

    pub fn keys(&self) -> OpenKeys<'_> {
        OpenKeys {
            kem_secret: Some(&self.kem.secret_key),
            verify_key: &self.signer.public_key,
        }
    }

    pub fn lookup(&self) -> impl FnMut(&[u8; 16]) -> Option<Vec<u8>> + '_ {
        move |id| (*id == self.session.key_id).then(|| self.session.key_bytes())
    }

    pub fn open(&self, bytes: &[u8]) -> Result<Vec<u8>, qgp_core::codec::OpenError> {
        qgp_core::codec::open(bytes, &self.keys(), &mut self.lookup(), &mut ReplayRegistry::new())
    }
}

/// "hello" sealed under the fixed parties and nonce seed.
pub fn golden_envelope(p: &Parties, layers: LayerFlags) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(GOLDEN_NONCE_SEED);
    seal(GOLDEN_MESSAGE, &p.context(layers), layers, &mut rng).unwrap()
}

/// Frozen bytes of [`golden_envelope`] for each layer combination.
pub fn golden_hex(layers: LayerFlags) -> &'static str {
    match (layers.qkd, layers.kyber) {
        (true, true) => include_str!("../data/golden_both.hex"),
        (true, false) => include_str!("../data/golden_qkd.hex"),
        _ => include_str!("../data/golden_kyber.hex"),
    }
    .trim()
}

/// Every scenario under `tests/fixtures/scenarios`, sorted by file name.
pub fn scenario_fixtures() -> Vec<(String, qgp_core::netsim::ScenarioSpec)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scenarios");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let spec = qgp_core::netsim::ScenarioSpec::from_json(&std::fs::read_to_string(&p).unwrap())
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, spec)
        })
        .collect()
}
