//! Key buffer between the quantum channel and the two endpoints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::pack_msb;
use crate::qkd::SessionKeyMaterial;

/// Error codes carried in `code` of an error response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    #[error("ALARM_ACTIVE")]
    AlarmActive,
    #[error("INSUFFICIENT_KEY")]
    InsufficientKey,
    #[error("UNKNOWN_KEY_ID")]
    UnknownKeyId,
    #[error("ALREADY_CONSUMED")]
    AlreadyConsumed,
    /// The caller is not the peer named when the key was reserved.
    #[error("UNAUTHORIZED_PEER")]
    UnauthorizedPeer,
    #[error("BAD_REQUEST")]
    BadRequest,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::AlarmActive => "ALARM_ACTIVE",
            ErrorCode::InsufficientKey => "INSUFFICIENT_KEY",
            ErrorCode::UnknownKeyId => "UNKNOWN_KEY_ID",
            ErrorCode::AlreadyConsumed => "ALREADY_CONSUMED",
            ErrorCode::UnauthorizedPeer => "UNAUTHORIZED_PEER",
            ErrorCode::BadRequest => "BAD_REQUEST",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("key_id {} is already in the pool", hex::encode(.0))]
pub struct DuplicateKeyId(pub [u8; 16]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmCause {
    Qber,
    /// Raised by the operator when no fresh material has arrived; cleared by
    /// the next ingest.
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum EntryState {
    Available,
    Reserved { requester: String, peer: String, size_bits: usize },
    Consumed,
}

#[derive(Debug, Clone)]
struct Entry {
    key_bits: Vec<u8>,
    /// Ingest sequence number; allocation is oldest first.
    created_at: u64,
    state: EntryState,
}

/// Key bytes released to one party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveredKey {
    pub key_id: [u8; 16],
    /// `size_bits` rounded up to whole bytes; surplus low bits of the last
    /// byte are zero.
    pub key: Vec<u8>,
    pub size_bits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolStatus {
    pub qber: f64,
    pub stored_bits: usize,
    pub alarm: bool,
}

#[derive(Debug, Default)]
pub struct KeyPool {
    entries: BTreeMap<[u8; 16], Entry>,
    next_seq: u64,
    stored_bits: usize,
    alarm: Option<AlarmCause>,
    last_qber: f64,
}

fn truncate_bits(bits: &[u8], size_bits: usize) -> Vec<u8> {
    pack_msb(&bits[..size_bits])
}

impl KeyPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ingest(&mut self, material: SessionKeyMaterial) -> Result<(), DuplicateKeyId> {
        if self.entries.contains_key(&material.key_id) {
            return Err(DuplicateKeyId(material.key_id));
        }
        self.stored_bits += material.key_bits.len();
        self.last_qber = material.qber;
        self.entries.insert(
            material.key_id,
            Entry {
                key_bits: material.key_bits,
                created_at: self.next_seq,
                state: EntryState::Available,
            },
        );
        self.next_seq += 1;
        if self.alarm == Some(AlarmCause::Stale) {
            self.alarm = None;
        }
        Ok(())
    }

    pub fn raise_alarm(&mut self, qber: f64) {
        self.alarm = Some(AlarmCause::Qber);
        self.last_qber = qber;
    }

    pub fn mark_stale(&mut self) {
        if self.alarm.is_none() {
            self.alarm = Some(AlarmCause::Stale);
        }
    }

    pub fn clear_alarm(&mut self) {
        self.alarm = None;
    }

    pub fn alarm(&self) -> Option<AlarmCause> {
        self.alarm
    }

    pub fn stored_bits(&self) -> usize {
        self.stored_bits
    }

    pub fn status(&self) -> PoolStatus {
        PoolStatus {
            qber: self.last_qber,
            stored_bits: self.stored_bits,
            alarm: self.alarm.is_some(),
        }
    }

    /// Reserves the oldest available entry holding at least `size_bits` and
    /// releases it to `requester`; the same bytes are later released once to
    /// `peer` by [`KeyPool::get_key_by_id`].
    pub fn get_key(&mut self, requester: &str, peer: &str, size_bits: usize) -> Result<DeliveredKey, ErrorCode> {
        if self.alarm.is_some() {
            return Err(ErrorCode::AlarmActive);
        }
        if size_bits == 0 {
            return Err(ErrorCode::BadRequest);
        }
        let (key_id, entry) = self
            .entries
            .iter_mut()
            .filter(|(_, e)| e.state == EntryState::Available && e.key_bits.len() >= size_bits)
            .min_by_key(|(_, e)| e.created_at)
            .ok_or(ErrorCode::InsufficientKey)?;
        entry.state = EntryState::Reserved {
            requester: requester.to_string(),
            peer: peer.to_string(),
            size_bits,
        };
        Ok(DeliveredKey {
            key_id: *key_id,
            key: truncate_bits(&entry.key_bits, size_bits),
            size_bits,
        })
    }

    pub fn get_key_by_id(&mut self, requester: &str, key_id: &[u8; 16]) -> Result<DeliveredKey, ErrorCode> {
        if self.alarm.is_some() {
            return Err(ErrorCode::AlarmActive);
        }
        let entry = self.entries.get_mut(key_id).ok_or(ErrorCode::UnknownKeyId)?;
        let size_bits = match &entry.state {
            // Never handed out, so the identifier has not been issued yet.
            EntryState::Available => return Err(ErrorCode::UnknownKeyId),
            EntryState::Consumed => return Err(ErrorCode::AlreadyConsumed),
            EntryState::Reserved { peer, size_bits, .. } => {
                if peer != requester {
                    return Err(ErrorCode::UnauthorizedPeer);
                }
                *size_bits
            }
        };
        let key = truncate_bits(&entry.key_bits, size_bits);
        self.stored_bits -= entry.key_bits.len();
        entry.state = EntryState::Consumed;
        Ok(DeliveredKey {
            key_id: *key_id,
            key,
            size_bits,
        })
    }

    /// Identifiers of all entries ever ingested, in ingest order.
    pub fn key_ids(&self) -> Vec<[u8; 16]> {
        let mut ids: Vec<_> = self.entries.iter().map(|(id, e)| (e.created_at, *id)).collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }
}
