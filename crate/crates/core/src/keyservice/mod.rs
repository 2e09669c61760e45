//! Key-delivery control plane: buffers distilled QKD keys and hands each one
//! to exactly two named parties, once each.

mod client;
mod pool;
mod server;
mod wire;

pub use client::{ClientError, KeyServiceClient};
pub use pool::{AlarmCause, DeliveredKey, DuplicateKeyId, ErrorCode, KeyPool, PoolStatus};
pub use server::{KeyServer, SharedPool};
pub use wire::{
    handle_payload, read_frame, serve_key, write_frame, FrameRead, KeyRequest, KeyResponse, ResponseStatus,
    MAX_FRAME_BYTES,
};
