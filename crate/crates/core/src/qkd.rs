//! BB84 prepare-and-measure simulation with an intercept-resend eavesdropper,
//! followed by sifting, QBER estimation, parity reconciliation and privacy
//! amplification.
//!
//! Every function is deterministic in its explicit seed. Each pulse consumes
//! the same nine random draws whatever the parameters, so changing one
//! probability never shifts the random stream of later pulses.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Digest, Sha3_256, Shake256};
use thiserror::Error;

use crate::bits::{pack_msb, parity, unpack_msb};

/// Standard one-way BB84 abort threshold.
pub const DEFAULT_QBER_THRESHOLD: f64 = 0.11;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.5;
/// Safety margin subtracted from every distilled key.
pub const PA_SECURITY_MARGIN: i64 = 64;
pub const MIN_KEY_BITS: usize = 128;
/// Upper bound on reconciliation passes in [`run_exchange`].
pub const MAX_RECONCILE_PASSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkdError {
    #[error("at least one pulse is required")]
    EmptyInput,
    #[error("invalid channel parameter: {0}")]
    InvalidParams(&'static str),
    #[error("not enough sifted bits for the requested sample")]
    InsufficientMaterial,
    #[error("alice and bob keys are not aligned")]
    Misaligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    fn from_bit(b: bool) -> Self {
        if b {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EveMode {
    #[default]
    None,
    InterceptResend {
        intercept_prob: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ChannelParams {
    pub noise_flip_prob: f64,
    pub loss_prob: f64,
    #[serde(default)]
    pub eve_mode: EveMode,
}

fn is_prob(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), QkdError> {
        if !is_prob(self.noise_flip_prob) {
            return Err(QkdError::InvalidParams("noise_flip_prob must lie in [0, 1]"));
        }
        // loss_prob = 1 is accepted: it models a cut fiber.
        if !is_prob(self.loss_prob) {
            return Err(QkdError::InvalidParams("loss_prob must lie in [0, 1]"));
        }
        if let EveMode::InterceptResend { intercept_prob } = self.eve_mode {
            if !is_prob(intercept_prob) {
                return Err(QkdError::InvalidParams("intercept_prob must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Expected sifted error rate p(1 - q/2) + q/4.
    pub fn analytic_qber(&self) -> f64 {
        let q = match self.eve_mode {
            EveMode::None => 0.0,
            EveMode::InterceptResend { intercept_prob } => intercept_prob,
        };
        self.noise_flip_prob * (1.0 - q / 2.0) + q / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub alice_bit: u8,
    pub alice_basis: Basis,
    pub eve_intercepted: bool,
    pub bob_basis: Basis,
    /// `None` when the pulse was lost.
    pub bob_bit: Option<u8>,
}

pub fn exchange_pulses(n_pulses: usize, params: &ChannelParams, rng_seed: u64) -> Result<Vec<PulseRecord>, QkdError> {
    if n_pulses == 0 {
        return Err(QkdError::EmptyInput);
    }
    params.validate()?;
    let intercept_prob = match params.eve_mode {
        EveMode::None => None,
        EveMode::InterceptResend { intercept_prob } => Some(intercept_prob),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(n_pulses);
    for _ in 0..n_pulses {
        let alice_bit = u8::from(rng.gen::<bool>());
        let alice_basis = Basis::from_bit(rng.gen());
        let eve_fires = rng.gen::<f64>();
        let eve_basis = Basis::from_bit(rng.gen());
        let eve_random_bit = u8::from(rng.gen::<bool>());
        let loss = rng.gen::<f64>();
        let bob_basis = Basis::from_bit(rng.gen());
        let bob_random_bit = u8::from(rng.gen::<bool>());
        let noise = rng.gen::<f64>();

        let eve_intercepted = intercept_prob.is_some_and(|q| eve_fires < q);
        let (photon_bit, photon_basis) = if eve_intercepted {
            let eve_bit = if eve_basis == alice_basis { alice_bit } else { eve_random_bit };
            (eve_bit, eve_basis)
        } else {
            (alice_bit, alice_basis)
        };
        let bob_bit = if loss < params.loss_prob {
            None
        } else {
            let measured = if bob_basis == photon_basis { photon_bit } else { bob_random_bit };
            Some(if noise < params.noise_flip_prob { measured ^ 1 } else { measured })
        };
        out.push(PulseRecord {
            alice_bit,
            alice_basis,
            eve_intercepted,
            bob_basis,
            bob_bit,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SiftedKey {
    pub bits: Vec<u8>,
    pub source_positions: Vec<usize>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

pub fn sift(pulses: &[PulseRecord]) -> (SiftedKey, SiftedKey) {
    let mut alice = SiftedKey::default();
    let mut bob = SiftedKey::default();
    for (i, p) in pulses.iter().enumerate() {
        if let (Some(b), true) = (p.bob_bit, p.alice_basis == p.bob_basis) {
            alice.bits.push(p.alice_bit);
            bob.bits.push(b);
            alice.source_positions.push(i);
            bob.source_positions.push(i);
        }
    }
    (alice, bob)
}

/// Fraction of positions where the two sifted keys disagree (0 when empty).
pub fn sifted_error_rate(alice: &SiftedKey, bob: &SiftedKey) -> f64 {
    if alice.is_empty() {
        return 0.0;
    }
    let errors = alice.bits.iter().zip(bob.bits.iter()).filter(|(a, b)| a != b).count();
    errors as f64 / alice.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub sample_size: usize,
    pub remaining_alice: SiftedKey,
    pub remaining_bob: SiftedKey,
}

/// Publicly compares a uniform sample of `ceil(sample_fraction * n)` positions
/// and discards them.
pub fn estimate_qber(
    alice: &SiftedKey,
    bob: &SiftedKey,
    sample_fraction: f64,
    rng_seed: u64,
) -> Result<QberEstimate, QkdError> {
    if alice.source_positions != bob.source_positions || alice.len() != bob.len() {
        return Err(QkdError::Misaligned);
    }
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(QkdError::InvalidParams("sample_fraction must lie in (0, 1)"));
    }
    let n = alice.len();
    let m = (sample_fraction * n as f64).ceil() as usize;
    if n == 0 || m >= n {
        return Err(QkdError::InsufficientMaterial);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut sampled = vec![false; n];
    for i in index::sample(&mut rng, n, m) {
        sampled[i] = true;
    }
    let mut mismatches = 0usize;
    let mut remaining_alice = SiftedKey::default();
    let mut remaining_bob = SiftedKey::default();
    for i in 0..n {
        if sampled[i] {
            mismatches += usize::from(alice.bits[i] != bob.bits[i]);
        } else {
            remaining_alice.bits.push(alice.bits[i]);
            remaining_alice.source_positions.push(alice.source_positions[i]);
            remaining_bob.bits.push(bob.bits[i]);
            remaining_bob.source_positions.push(bob.source_positions[i]);
        }
    }
    Ok(QberEstimate {
        qber: mismatches as f64 / m as f64,
        sample_size: m,
        remaining_alice,
        remaining_bob,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("reconciled keys still differ")]
pub struct ReconcileFailure;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reconciled {
    pub corrected_bob: Vec<u8>,
    pub leaked_bits: usize,
    pub passes: usize,
}

/// Block length for a given error rate; the whole key when `qber` is 0.
pub fn reconcile_block_size(qber: f64, n: usize) -> usize {
    if qber <= 0.0 {
        n.max(1)
    } else {
        ((0.73 / qber).ceil() as usize).clamp(8, 1024)
    }
}

/// Runs one parity pass over `order` (a permutation of key positions) and
/// corrects one error in each block whose parities disagree. Returns the
/// number of parities revealed and the number of bits flipped.
fn parity_pass(alice: &[u8], bob: &mut [u8], order: &[usize], block: usize) -> (usize, usize) {
    let mut leaked = 0;
    let mut fixed = 0;
    for chunk in order.chunks(block) {
        leaked += 1;
        let pa = parity(chunk.iter().map(|&i| alice[i]));
        let pb = parity(chunk.iter().map(|&i| bob[i]));
        if pa == pb {
            continue;
        }
        let (mut lo, mut hi) = (0, chunk.len());
        while hi - lo > 1 {
            let mid = lo + (hi - lo).div_ceil(2);
            leaked += 1;
            let half = &chunk[lo..mid];
            let pa = parity(half.iter().map(|&i| alice[i]));
            let pb = parity(half.iter().map(|&i| bob[i]));
            if pa != pb {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        bob[chunk[lo]] ^= 1;
        fixed += 1;
    }
    (leaked, fixed)
}

fn key_digest(bits: &[u8]) -> [u8; 32] {
    let mut h = Sha3_256::new();
    Digest::update(&mut h, (bits.len() as u64).to_be_bytes());
    Digest::update(&mut h, pack_msb(bits));
    h.finalize().into()
}

/// Single-pass binary parity reconciliation with a final SHA3-256 comparison.
pub fn reconcile(alice: &SiftedKey, bob: &SiftedKey, qber: f64) -> Result<Reconciled, ReconcileFailure> {
    reconcile_with_passes(alice, bob, qber, 1, 0)
}

/// Repeats the parity pass over seeded random permutations until the key
/// digests agree or `max_passes` is reached. The block length doubles after a
/// pass that found no mismatched block. With `max_passes = 1` this is exactly
/// [`reconcile`].
pub fn reconcile_with_passes(
    alice: &SiftedKey,
    bob: &SiftedKey,
    qber: f64,
    max_passes: usize,
    rng_seed: u64,
) -> Result<Reconciled, ReconcileFailure> {
    if alice.len() != bob.len() {
        return Err(ReconcileFailure);
    }
    let n = alice.len();
    let mut corrected = bob.bits.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let mut block = reconcile_block_size(qber, n);
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut leaked = 0;
    let target = key_digest(&alice.bits);
    let mut corrected_last = true;
    for pass in 0..max_passes.max(1) {
        if pass > 0 {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            if !corrected_last {
                block = (block * 2).min(n.max(1));
            }
        }
        let (revealed, fixed) = parity_pass(&alice.bits, &mut corrected, &order, block);
        leaked += revealed;
        corrected_last = fixed > 0;
        if key_digest(&corrected) == target {
            return Ok(Reconciled {
                corrected_bob: corrected,
                leaked_bits: leaked,
                passes: pass + 1,
            });
        }
    }
    Err(ReconcileFailure)
}

/// Binary entropy in bits; h2(0) = h2(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// floor(n (1 - 2 h2(qber))) - leaked - 64, possibly negative.
pub fn amplified_length(n: usize, qber: f64, leaked_bits: usize) -> i64 {
    (n as f64 * (1.0 - 2.0 * binary_entropy(qber))).floor() as i64 - leaked_bits as i64 - PA_SECURITY_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionKeyMaterial {
    pub key_id: [u8; 16],
    /// One bit per element.
    pub key_bits: Vec<u8>,
    pub qber: f64,
    pub leaked_bits: usize,
}

impl SessionKeyMaterial {
    pub fn key_bytes(&self) -> Vec<u8> {
        pack_msb(&self.key_bits)
    }

    pub fn key_id_hex(&self) -> String {
        hex::encode(self.key_id)
    }

    /// Cuts the key into consecutive `chunk_bits`-bit keys, each with its own
    /// identifier derived from the parent's. A short tail is dropped.
    pub fn split(&self, chunk_bits: usize) -> Vec<SessionKeyMaterial> {
        assert!(chunk_bits > 0);
        self.key_bits
            .chunks_exact(chunk_bits)
            .enumerate()
            .map(|(i, bits)| {
                let mut h = Sha3_256::new();
                Digest::update(&mut h, self.key_id);
                Digest::update(&mut h, (i as u32).to_be_bytes());
                Digest::update(&mut h, b"QGP-split");
                let digest = h.finalize();
                SessionKeyMaterial {
                    key_id: digest[..16].try_into().expect("16 bytes"),
                    key_bits: bits.to_vec(),
                    qber: self.qber,
                    leaked_bits: self.leaked_bits,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("distillation leaves fewer than {MIN_KEY_BITS} secret bits")]
pub struct AbortInsufficientKey;

pub fn privacy_amplify(
    corrected_key: &[u8],
    qber: f64,
    leaked_bits: usize,
    amp_seed: &[u8; 32],
) -> Result<SessionKeyMaterial, AbortInsufficientKey> {
    let len = amplified_length(corrected_key.len(), qber, leaked_bits);
    if len < MIN_KEY_BITS as i64 {
        return Err(AbortInsufficientKey);
    }
    let len = len as usize;
    let mut xof = Shake256::default();
    xof.update(amp_seed);
    xof.update(&pack_msb(corrected_key));
    let mut out = vec![0u8; len.div_ceil(8)];
    xof.finalize_xof().read(&mut out);
    let mut h = Sha3_256::new();
    Digest::update(&mut h, amp_seed);
    Digest::update(&mut h, b"QGP-keyid");
    let key_id: [u8; 16] = h.finalize()[..16].try_into().expect("16 bytes");
    Ok(SessionKeyMaterial {
        key_id,
        key_bits: unpack_msb(&out, len),
        qber,
        leaked_bits,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExchangeAbort {
    #[error("QBER {qber:.4} exceeds the alarm threshold")]
    QberAlarm { qber: f64 },
    #[error("insufficient key material")]
    InsufficientKey,
    #[error("reconciliation failed")]
    ReconcileFailure,
    #[error(transparent)]
    Invalid(#[from] QkdError),
}

/// Observables of one exchange, available whether or not it distilled a key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeReport {
    pub sifted_bits: usize,
    /// `None` when the sifted key was too short to sample.
    pub qber: Option<f64>,
    pub outcome: Result<SessionKeyMaterial, ExchangeAbort>,
}

impl ExchangeReport {
    pub fn key_bits(&self) -> usize {
        self.outcome.as_ref().map_or(0, |k| k.key_bits.len())
    }

    pub fn alarm(&self) -> bool {
        matches!(self.outcome, Err(ExchangeAbort::QberAlarm { .. }))
    }
}

/// Full layer-0 round: pulses, sifting, QBER estimate, alarm check,
/// multi-pass reconciliation and privacy amplification.
pub fn run_exchange_report(n_pulses: usize, params: &ChannelParams, qber_threshold: f64, rng_seed: u64) -> ExchangeReport {
    let invalid = |e: QkdError| ExchangeReport {
        sifted_bits: 0,
        qber: None,
        outcome: Err(ExchangeAbort::Invalid(e)),
    };
    if !(qber_threshold > 0.0 && qber_threshold < 0.5) {
        return invalid(QkdError::InvalidParams("qber_threshold must lie in (0, 0.5)"));
    }
    let mut master = ChaCha20Rng::seed_from_u64(rng_seed);
    let pulse_seed: u64 = master.gen();
    let sample_seed: u64 = master.gen();
    let reconcile_seed: u64 = master.gen();
    let amp_seed: [u8; 32] = master.gen();

    let pulses = match exchange_pulses(n_pulses, params, pulse_seed) {
        Ok(p) => p,
        Err(e) => return invalid(e),
    };
    let (alice, bob) = sift(&pulses);
    let sifted_bits = alice.len();
    let report = |qber, outcome| ExchangeReport {
        sifted_bits,
        qber,
        outcome,
    };
    let est = match estimate_qber(&alice, &bob, DEFAULT_SAMPLE_FRACTION, sample_seed) {
        Ok(e) => e,
        Err(_) => return report(None, Err(ExchangeAbort::InsufficientKey)),
    };
    let qber = Some(est.qber);
    if est.qber > qber_threshold {
        return report(qber, Err(ExchangeAbort::QberAlarm { qber: est.qber }));
    }
    // Cheap early exit: even a perfect reconciliation could not reach the minimum.
    if amplified_length(est.remaining_alice.len(), est.qber, 0) < MIN_KEY_BITS as i64 {
        return report(qber, Err(ExchangeAbort::InsufficientKey));
    }
    let rec = match reconcile_with_passes(
        &est.remaining_alice,
        &est.remaining_bob,
        est.qber,
        MAX_RECONCILE_PASSES,
        reconcile_seed,
    ) {
        Ok(r) => r,
        Err(ReconcileFailure) => return report(qber, Err(ExchangeAbort::ReconcileFailure)),
    };
    let outcome = privacy_amplify(&rec.corrected_bob, est.qber, rec.leaked_bits, &amp_seed)
        .map_err(|_| ExchangeAbort::InsufficientKey);
    report(qber, outcome)
}

pub fn run_exchange(
    n_pulses: usize,
    params: &ChannelParams,
    qber_threshold: f64,
    rng_seed: u64,
) -> Result<SessionKeyMaterial, ExchangeAbort> {
    run_exchange_report(n_pulses, params, qber_threshold, rng_seed).outcome
}

pub const CSV_HEADER: &str = "round,qber,sifted_bits,key_bits,alarm";

/// One CSV row of the round log. A missing QBER is written as an empty field.
pub fn csv_row(round: usize, report: &ExchangeReport) -> String {
    let qber = report.qber.map(|q| format!("{q:.6}")).unwrap_or_default();
    format!("{round},{qber},{},{},{}", report.sifted_bits, report.key_bits(), report.alarm())
}
