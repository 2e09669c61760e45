//! Blocking client for the key service.

use std::io;
use std::net::{TcpStream, ToSocketAddrs};

use thiserror::Error;

use super::pool::{DeliveredKey, ErrorCode, PoolStatus};
use super::wire::{read_frame, write_frame, FrameRead, KeyRequest, KeyResponse, ResponseStatus};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("key service i/o: {0}")]
    Io(#[from] io::Error),
    #[error("key service refused: {0}")]
    Service(ErrorCode),
    #[error("malformed key service response: {0}")]
    Protocol(String),
}

pub struct KeyServiceClient {
    stream: TcpStream,
}

impl KeyServiceClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ClientError> {
        Ok(KeyServiceClient {
            stream: TcpStream::connect(addr)?,
        })
    }

    pub fn request(&mut self, request: &KeyRequest) -> Result<KeyResponse, ClientError> {
        self.raw(&request.to_json())
    }

    /// Sends an arbitrary payload; exposed for protocol testing.
    pub fn raw(&mut self, payload: &[u8]) -> Result<KeyResponse, ClientError> {
        write_frame(&mut self.stream, payload)?;
        match read_frame(&mut self.stream)? {
            FrameRead::Payload(p) => serde_json::from_slice(&p).map_err(|e| ClientError::Protocol(e.to_string())),
            FrameRead::Closed => Err(ClientError::Protocol("connection closed".into())),
            FrameRead::TooLarge(n) => Err(ClientError::Protocol(format!("{n}-byte response"))),
        }
    }

    fn expect_key(response: KeyResponse) -> Result<DeliveredKey, ClientError> {
        match response.status {
            ResponseStatus::Error => Err(ClientError::Service(response.code.unwrap_or(ErrorCode::BadRequest))),
            ResponseStatus::Ok => response
                .delivered_key()
                .ok_or_else(|| ClientError::Protocol("ok response without key fields".into())),
        }
    }

    pub fn get_key(&mut self, requester: &str, peer: &str, size_bits: usize) -> Result<DeliveredKey, ClientError> {
        let r = self.request(&KeyRequest::GetKey {
            requester: requester.into(),
            peer: peer.into(),
            size_bits,
        })?;
        Self::expect_key(r)
    }

    pub fn get_key_by_id(&mut self, requester: &str, key_id: &[u8; 16]) -> Result<DeliveredKey, ClientError> {
        let r = self.request(&KeyRequest::GetKeyById {
            requester: requester.into(),
            key_id: *key_id,
        })?;
        Self::expect_key(r)
    }

    pub fn status(&mut self) -> Result<PoolStatus, ClientError> {
        let r = self.request(&KeyRequest::Status)?;
        if r.status == ResponseStatus::Error {
            return Err(ClientError::Service(r.code.unwrap_or(ErrorCode::BadRequest)));
        }
        match (r.qber, r.stored_bits, r.alarm) {
            (Some(qber), Some(stored_bits), Some(alarm)) => Ok(PoolStatus {
                qber,
                stored_bits,
                alarm,
            }),
            _ => Err(ClientError::Protocol("incomplete status response".into())),
        }
    }
}
