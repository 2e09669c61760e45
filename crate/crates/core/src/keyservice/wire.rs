//! Length-prefixed JSON protocol: a 4-byte big-endian length, then one UTF-8
//! JSON object.

use std::io::{self, Read, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::pool::{DeliveredKey, ErrorCode, KeyPool};

/// Frames above this size are refused and the connection is closed.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyRequest {
    GetKey { requester: String, peer: String, size_bits: usize },
    GetKeyById { requester: String, key_id: [u8; 16] },
    Status,
}

/// Loose wire shape; every field optional so that validation, not the JSON
/// decoder, decides what is missing.
#[derive(Debug, Default, Serialize, Deserialize)]
struct RawRequest {
    op: Option<String>,
    requester: Option<String>,
    peer: Option<String>,
    size_bits: Option<u64>,
    key_id: Option<String>,
}

fn parse_key_id(s: &str) -> Option<[u8; 16]> {
    // Lowercase hex only.
    if s.len() != 32 || s.bytes().any(|b| !matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return None;
    }
    hex::decode(s).ok()?.try_into().ok()
}

impl KeyRequest {
    pub fn from_json(bytes: &[u8]) -> Result<KeyRequest, ErrorCode> {
        let raw: RawRequest = serde_json::from_slice(bytes).map_err(|_| ErrorCode::BadRequest)?;
        let bad = || ErrorCode::BadRequest;
        match raw.op.as_deref() {
            Some("get_key") => Ok(KeyRequest::GetKey {
                requester: raw.requester.ok_or_else(bad)?,
                peer: raw.peer.ok_or_else(bad)?,
                size_bits: usize::try_from(raw.size_bits.ok_or_else(bad)?).map_err(|_| bad())?,
            }),
            Some("get_key_by_id") => Ok(KeyRequest::GetKeyById {
                requester: raw.requester.ok_or_else(bad)?,
                key_id: parse_key_id(raw.key_id.as_deref().ok_or_else(bad)?).ok_or_else(bad)?,
            }),
            Some("status") => Ok(KeyRequest::Status),
            _ => Err(bad()),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let raw = match self {
            KeyRequest::GetKey {
                requester,
                peer,
                size_bits,
            } => RawRequest {
                op: Some("get_key".into()),
                requester: Some(requester.clone()),
                peer: Some(peer.clone()),
                size_bits: Some(*size_bits as u64),
                key_id: None,
            },
            KeyRequest::GetKeyById { requester, key_id } => RawRequest {
                op: Some("get_key_by_id".into()),
                requester: Some(requester.clone()),
                key_id: Some(hex::encode(key_id)),
                ..Default::default()
            },
            KeyRequest::Status => RawRequest {
                op: Some("status".into()),
                ..Default::default()
            },
        };
        serde_json::to_vec(&StripNulls(&raw)).expect("plain struct serializes")
    }
}

/// Serializes a struct without its `null` fields.
struct StripNulls<'a, T>(&'a T);

impl<T: Serialize> Serialize for StripNulls<'_, T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut v = serde_json::to_value(self.0).map_err(serde::ser::Error::custom)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.retain(|_, x| !x.is_null());
        }
        v.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyResponse {
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qber: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<ErrorCode>,
}

impl KeyResponse {
    fn empty(status: ResponseStatus) -> Self {
        KeyResponse {
            status,
            key_id: None,
            key: None,
            size_bits: None,
            qber: None,
            stored_bits: None,
            alarm: None,
            code: None,
        }
    }

    pub fn error(code: ErrorCode) -> Self {
        KeyResponse {
            code: Some(code),
            ..Self::empty(ResponseStatus::Error)
        }
    }

    pub fn delivered(key: &DeliveredKey) -> Self {
        KeyResponse {
            key_id: Some(hex::encode(key.key_id)),
            key: Some(BASE64.encode(&key.key)),
            size_bits: Some(key.size_bits),
            ..Self::empty(ResponseStatus::Ok)
        }
    }

    /// Decodes the key fields of a successful key response.
    pub fn delivered_key(&self) -> Option<DeliveredKey> {
        Some(DeliveredKey {
            key_id: parse_key_id(self.key_id.as_deref()?)?,
            key: BASE64.decode(self.key.as_deref()?).ok()?,
            size_bits: self.size_bits?,
        })
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("plain struct serializes")
    }
}

pub fn serve_key(pool: &mut KeyPool, request: &KeyRequest) -> KeyResponse {
    let delivered = match request {
        KeyRequest::GetKey {
            requester,
            peer,
            size_bits,
        } => pool.get_key(requester, peer, *size_bits),
        KeyRequest::GetKeyById { requester, key_id } => pool.get_key_by_id(requester, key_id),
        KeyRequest::Status => {
            let s = pool.status();
            return KeyResponse {
                qber: Some(s.qber),
                stored_bits: Some(s.stored_bits),
                alarm: Some(s.alarm),
                ..KeyResponse::empty(ResponseStatus::Ok)
            };
        }
    };
    match delivered {
        Ok(k) => KeyResponse::delivered(&k),
        Err(code) => KeyResponse::error(code),
    }
}

/// One request payload in, one response payload out; never fails.
pub fn handle_payload(pool: &mut KeyPool, payload: &[u8]) -> Vec<u8> {
    let response = match KeyRequest::from_json(payload) {
        Ok(req) => serve_key(pool, &req),
        Err(code) => KeyResponse::error(code),
    };
    response.to_json()
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

#[derive(Debug)]
pub enum FrameRead {
    Payload(Vec<u8>),
    /// Clean end of stream before a length prefix.
    Closed,
    /// Declared length above [`MAX_FRAME_BYTES`].
    TooLarge(usize),
}

pub fn read_frame<R: Read>(r: &mut R) -> io::Result<FrameRead> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(FrameRead::Closed),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_BYTES {
        return Ok(FrameRead::TooLarge(len));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(FrameRead::Payload(buf))
}
