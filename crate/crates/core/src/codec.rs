//! QGP envelope: hash, sign the hash, prepend the signature, compress,
//! encrypt under a one-time QKD key, then wrap under a Kyber-derived key.
//!
//! Byte layout (integers big-endian):
//!
//! ```text
//! "QGP1" | version | suite | flags | reserved | key_id[16]
//! | kem_ct_len u32 | kem_ct | nonce_outer[12] | nonce_inner[12]
//! | body_len u32 | body
//! ```
//!
//! Both AEAD layers authenticate every header byte preceding `body`.

use std::collections::HashSet;

use qgp_pqc::aead::{aead_open, aead_seal, AeadKey, AeadNonce, TAG_BYTES};
use qgp_pqc::{compress, decaps, decompress, encaps, hash, sign, verify, HashAlgorithm, PqcError};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha3::{Digest as _, Sha3_256};
use thiserror::Error;

use crate::qkd::SessionKeyMaterial;

pub const MAGIC: [u8; 4] = *b"QGP1";
pub const VERSION: u8 = 1;
/// SHA3-256, Dilithium3, Kyber768, AES-256-GCM, DEFLATE.
pub const SUITE_SHA3: u8 = 0x01;
/// As [`SUITE_SHA3`] with SHA2-256 as the message hash.
pub const SUITE_SHA2: u8 = 0x02;
pub const FLAG_QKD: u8 = 0b01;
pub const FLAG_KYBER: u8 = 0b10;
/// Bytes before `kem_ct`.
pub const FIXED_PREFIX_BYTES: usize = 4 + 4 + 16 + 4;
pub const MIN_SESSION_KEY_BITS: usize = 256;
pub const MAX_MESSAGE_BYTES: usize = (u32::MAX - 1024) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerFlags {
    pub qkd: bool,
    pub kyber: bool,
}

impl LayerFlags {
    pub const QKD_ONLY: LayerFlags = LayerFlags { qkd: true, kyber: false };
    pub const KYBER_ONLY: LayerFlags = LayerFlags { qkd: false, kyber: true };
    pub const BOTH: LayerFlags = LayerFlags { qkd: true, kyber: true };

    pub fn bits(self) -> u8 {
        (self.qkd as u8 * FLAG_QKD) | (self.kyber as u8 * FLAG_KYBER)
    }

    pub fn from_bits(bits: u8) -> LayerFlags {
        LayerFlags {
            qkd: bits & FLAG_QKD != 0,
            kyber: bits & FLAG_KYBER != 0,
        }
    }
}

pub fn suite_for(algorithm: HashAlgorithm) -> u8 {
    match algorithm {
        HashAlgorithm::Sha3_256 => SUITE_SHA3,
        HashAlgorithm::Sha2_256 => SUITE_SHA2,
    }
}

pub fn suite_hash(suite: u8) -> Option<HashAlgorithm> {
    match suite {
        SUITE_SHA3 => Some(HashAlgorithm::Sha3_256),
        SUITE_SHA2 => Some(HashAlgorithm::Sha2_256),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QgpEnvelope {
    pub version: u8,
    pub suite: u8,
    pub flags: u8,
    pub reserved: u8,
    pub key_id: [u8; 16],
    pub kem_ct: Vec<u8>,
    pub nonce_outer: [u8; 12],
    pub nonce_inner: [u8; 12],
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FramingError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported suite {0:#04x}")]
    UnsupportedSuite(u8),
    #[error("envelope truncated")]
    Truncated,
    #[error("{0} trailing bytes after body")]
    TrailingData(usize),
    #[error("inconsistent header: {0}")]
    Inconsistent(&'static str),
}

impl QgpEnvelope {
    /// Header bytes preceding the body; the associated data of both layers.
    pub fn header_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_PREFIX_BYTES + self.kem_ct.len() + 28);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[self.version, self.suite, self.flags, self.reserved]);
        out.extend_from_slice(&self.key_id);
        out.extend_from_slice(&(self.kem_ct.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.kem_ct);
        out.extend_from_slice(&self.nonce_outer);
        out.extend_from_slice(&self.nonce_inner);
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out
    }

    pub fn layers(&self) -> LayerFlags {
        LayerFlags::from_bits(self.flags)
    }
}

pub fn encode_envelope(e: &QgpEnvelope) -> Vec<u8> {
    let mut out = e.header_bytes();
    out.extend_from_slice(&e.body);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FramingError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(FramingError::Truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FramingError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<usize, FramingError> {
        Ok(u32::from_be_bytes(self.array()?) as usize)
    }
}

pub fn decode_envelope(bytes: &[u8]) -> Result<QgpEnvelope, FramingError> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() < 4 || c.array::<4>()? != MAGIC {
        return Err(FramingError::BadMagic);
    }
    let [version, suite, flags, reserved] = c.array()?;
    if version != VERSION {
        return Err(FramingError::UnsupportedVersion(version));
    }
    if suite_hash(suite).is_none() {
        return Err(FramingError::UnsupportedSuite(suite));
    }
    let key_id = c.array::<16>()?;
    let kem_ct_len = c.u32()?;
    let kem_ct = c.take(kem_ct_len)?.to_vec();
    let nonce_outer = c.array()?;
    let nonce_inner = c.array()?;
    let body_len = c.u32()?;
    let body = c.take(body_len)?.to_vec();
    if c.pos != bytes.len() {
        return Err(FramingError::TrailingData(bytes.len() - c.pos));
    }

    let layers = LayerFlags::from_bits(flags);
    if flags & !(FLAG_QKD | FLAG_KYBER) != 0 {
        return Err(FramingError::Inconsistent("unknown flag bits"));
    }
    if !layers.qkd && !layers.kyber {
        return Err(FramingError::Inconsistent("no layer flag set"));
    }
    if layers.kyber == kem_ct.is_empty() {
        return Err(FramingError::Inconsistent("kem_ct presence disagrees with flags"));
    }
    if layers.qkd == (key_id == [0; 16]) {
        return Err(FramingError::Inconsistent("key_id presence disagrees with flags"));
    }
    Ok(QgpEnvelope {
        version,
        suite,
        flags,
        reserved,
        key_id,
        kem_ct,
        nonce_outer,
        nonce_inner,
        body,
    })
}

/// Secret material available to the sender.
#[derive(Debug, Clone, Copy)]
pub struct SealContext<'a> {
    /// Dilithium3 secret key.
    pub signer: &'a [u8],
    pub session_key: Option<&'a SessionKeyMaterial>,
    /// Kyber768 public key.
    pub recipient_kem_public: Option<&'a [u8]>,
    pub hash_algorithm: HashAlgorithm,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SealError {
    #[error("seal context does not match layer flags: {0}")]
    ContextMismatch(&'static str),
    #[error("session key has {0} bits, at least {MIN_SESSION_KEY_BITS} required")]
    SessionKeyTooShort(usize),
    #[error("message of {0} bytes exceeds the envelope limit")]
    MessageTooLong(usize),
    #[error(transparent)]
    Key(#[from] PqcError),
}

/// Sender-side pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SealStage {
    Sign,
    Compress,
    QkdEncrypt,
    KyberWrap,
}

pub fn inner_key(session_key_bytes: &[u8]) -> AeadKey {
    let mut h = Sha3_256::new();
    h.update(session_key_bytes);
    h.update(b"QGP-inner");
    AeadKey(h.finalize().into())
}

pub fn outer_key(shared_secret: &[u8; 32]) -> AeadKey {
    let mut h = Sha3_256::new();
    h.update(shared_secret);
    h.update(b"QGP1-outer");
    AeadKey(h.finalize().into())
}

fn validate_context(ctx: &SealContext<'_>, layers: LayerFlags) -> Result<(), SealError> {
    if !layers.qkd && !layers.kyber {
        return Err(SealError::ContextMismatch("no layer requested"));
    }
    if layers.qkd != ctx.session_key.is_some() {
        return Err(SealError::ContextMismatch("session key presence"));
    }
    if layers.kyber != ctx.recipient_kem_public.is_some() {
        return Err(SealError::ContextMismatch("recipient KEM key presence"));
    }
    if let Some(k) = ctx.session_key {
        if k.key_bits.len() < MIN_SESSION_KEY_BITS {
            return Err(SealError::SessionKeyTooShort(k.key_bits.len()));
        }
        if k.key_id == [0; 16] {
            return Err(SealError::ContextMismatch("all-zero key_id is reserved"));
        }
    }
    Ok(())
}

pub fn seal(
    message: &[u8],
    ctx: &SealContext<'_>,
    layers: LayerFlags,
    nonce_source: &mut dyn RngCore,
) -> Result<Vec<u8>, SealError> {
    seal_traced(message, ctx, layers, nonce_source, &mut Vec::new())
}

/// As [`seal`], recording each stage as it executes.
pub fn seal_traced(
    message: &[u8],
    ctx: &SealContext<'_>,
    layers: LayerFlags,
    nonce_source: &mut dyn RngCore,
    trace: &mut Vec<SealStage>,
) -> Result<Vec<u8>, SealError> {
    validate_context(ctx, layers)?;
    if message.len() >= MAX_MESSAGE_BYTES {
        return Err(SealError::MessageTooLong(message.len()));
    }
    let digest = hash(message, ctx.hash_algorithm);
    let signature = sign(ctx.signer, digest.as_bytes())?;
    trace.push(SealStage::Sign);
    seal_inner(message, signature.as_ref(), ctx, layers, nonce_source, trace)
}

/// Seals `message` with caller-supplied signature bytes instead of signing.
pub fn seal_presigned(
    message: &[u8],
    signature: &[u8],
    ctx: &SealContext<'_>,
    layers: LayerFlags,
    nonce_source: &mut dyn RngCore,
) -> Result<Vec<u8>, SealError> {
    validate_context(ctx, layers)?;
    if message.len() >= MAX_MESSAGE_BYTES {
        return Err(SealError::MessageTooLong(message.len()));
    }
    seal_inner(message, signature, ctx, layers, nonce_source, &mut Vec::new())
}

fn seal_inner(
    message: &[u8],
    signature: &[u8],
    ctx: &SealContext<'_>,
    layers: LayerFlags,
    rng: &mut dyn RngCore,
    trace: &mut Vec<SealStage>,
) -> Result<Vec<u8>, SealError> {
    let mut plain = Vec::with_capacity(4 + signature.len() + message.len());
    plain.extend_from_slice(&(signature.len() as u32).to_be_bytes());
    plain.extend_from_slice(signature);
    plain.extend_from_slice(message);
    let zipped = compress(&plain);
    trace.push(SealStage::Compress);

    // Draw order is fixed: inner nonce, outer nonce, encapsulation seed.
    let mut nonce_inner = [0u8; 12];
    let mut nonce_outer = [0u8; 12];
    let mut encaps_seed = [0u8; 32];
    if layers.qkd {
        rng.fill_bytes(&mut nonce_inner);
    }
    let kem = if let Some(pk) = ctx.recipient_kem_public {
        rng.fill_bytes(&mut nonce_outer);
        rng.fill_bytes(&mut encaps_seed);
        Some(encaps(pk, &encaps_seed)?)
    } else {
        None
    };

    let body_len = zipped.len() + TAG_BYTES * (layers.qkd as usize + layers.kyber as usize);
    let mut envelope = QgpEnvelope {
        version: VERSION,
        suite: suite_for(ctx.hash_algorithm),
        flags: layers.bits(),
        reserved: 0,
        key_id: ctx.session_key.map_or([0; 16], |k| k.key_id),
        kem_ct: kem.as_ref().map_or_else(Vec::new, |(ct, _)| ct.bytes.clone()),
        nonce_outer,
        nonce_inner,
        body: vec![0; body_len],
    };
    let ad = envelope.header_bytes();

    let inner = match ctx.session_key {
        Some(k) => {
            let sealed = aead_seal(&inner_key(&k.key_bytes()), &AeadNonce(nonce_inner), &ad, &zipped);
            trace.push(SealStage::QkdEncrypt);
            sealed
        }
        None => zipped,
    };
    envelope.body = match &kem {
        Some((_, ss)) => {
            let sealed = aead_seal(&outer_key(ss.as_bytes()), &AeadNonce(nonce_outer), &ad, &inner);
            trace.push(SealStage::KyberWrap);
            sealed
        }
        None => inner,
    };
    debug_assert_eq!(envelope.body.len(), body_len);
    Ok(encode_envelope(&envelope))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
pub enum OpenError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version")]
    UnsupportedVersion,
    #[error("unsupported suite")]
    UnsupportedSuite,
    /// Truncation, trailing bytes or a header whose fields contradict its flags.
    #[error("malformed envelope")]
    Malformed,
    #[error("replay detected")]
    ReplayDetected,
    #[error("unknown key id")]
    UnknownKeyId,
    #[error("outer layer authentication failed")]
    OuterAuthFail,
    #[error("inner layer authentication failed")]
    InnerAuthFail,
    #[error("decompression failed")]
    DecompressError,
    #[error("signature invalid")]
    SignatureInvalid,
}

impl From<FramingError> for OpenError {
    fn from(e: FramingError) -> Self {
        match e {
            FramingError::BadMagic => OpenError::BadMagic,
            FramingError::UnsupportedVersion(_) => OpenError::UnsupportedVersion,
            FramingError::UnsupportedSuite(_) => OpenError::UnsupportedSuite,
            FramingError::Truncated | FramingError::TrailingData(_) | FramingError::Inconsistent(_) => {
                OpenError::Malformed
            }
        }
    }
}

/// Identifiers of envelopes already opened successfully. QKD envelopes are
/// keyed by key_id, Kyber-only envelopes by their outer nonce.
#[derive(Debug, Default, Clone)]
pub struct ReplayRegistry {
    seen: HashSet<ReplayTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ReplayTag {
    KeyId([u8; 16]),
    OuterNonce([u8; 12]),
}

fn replay_tag(e: &QgpEnvelope) -> ReplayTag {
    if e.layers().qkd {
        ReplayTag::KeyId(e.key_id)
    } else {
        ReplayTag::OuterNonce(e.nonce_outer)
    }
}

impl ReplayRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Receiver-side keys.
pub struct OpenKeys<'a> {
    /// Kyber768 secret key; required only for envelopes with the Kyber layer.
    pub kem_secret: Option<&'a [u8]>,
    /// Dilithium3 public key of the sender.
    pub verify_key: &'a [u8],
}

/// Inverse pipeline. `key_lookup` maps a key_id to the packed session key
/// bytes; it is consulted at most once, and only for envelopes that pass
/// framing and replay checks.
pub fn open(
    bytes: &[u8],
    keys: &OpenKeys<'_>,
    key_lookup: &mut dyn FnMut(&[u8; 16]) -> Option<Vec<u8>>,
    registry: &mut ReplayRegistry,
) -> Result<Vec<u8>, OpenError> {
    let envelope = decode_envelope(bytes)?;
    let tag = replay_tag(&envelope);
    if registry.seen.contains(&tag) {
        return Err(OpenError::ReplayDetected);
    }
    let layers = envelope.layers();
    let session_key = if layers.qkd {
        Some(key_lookup(&envelope.key_id).ok_or(OpenError::UnknownKeyId)?)
    } else {
        None
    };
    let ad = envelope.header_bytes();

    let inner = if layers.kyber {
        let sk = keys.kem_secret.ok_or(OpenError::OuterAuthFail)?;
        let ss = decaps(sk, &envelope.kem_ct).map_err(|_| OpenError::OuterAuthFail)?;
        aead_open(&outer_key(ss.as_bytes()), &AeadNonce(envelope.nonce_outer), &ad, &envelope.body)
            .map_err(|_| OpenError::OuterAuthFail)?
    } else {
        envelope.body
    };
    let zipped = match session_key {
        Some(k) => aead_open(&inner_key(&k), &AeadNonce(envelope.nonce_inner), &ad, &inner)
            .map_err(|_| OpenError::InnerAuthFail)?,
        None => inner,
    };
    let plain = decompress(&zipped).map_err(|_| OpenError::DecompressError)?;

    let (sig_len, rest) = plain.split_first_chunk::<4>().ok_or(OpenError::SignatureInvalid)?;
    let sig_len = u32::from_be_bytes(*sig_len) as usize;
    if sig_len > rest.len() {
        return Err(OpenError::SignatureInvalid);
    }
    let (signature, message) = rest.split_at(sig_len);
    let algorithm = suite_hash(envelope.suite).expect("suite validated by decode");
    let digest = hash(message, algorithm);
    if verify(keys.verify_key, digest.as_bytes(), signature) != Ok(true) {
        return Err(OpenError::SignatureInvalid);
    }
    registry.seen.insert(tag);
    Ok(message.to_vec())
}
