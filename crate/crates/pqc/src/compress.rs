//! Raw DEFLATE streams (no zlib or gzip container).

use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::{Compression, Decompress, FlushDecompress, Status};
use thiserror::Error;

/// The input is not one complete DEFLATE stream.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("corrupt deflate stream: {0}")]
    Corrupt(String),
    #[error("deflate stream ends before its final block")]
    Truncated,
    #[error("{0} bytes follow the end of the deflate stream")]
    TrailingData(usize),
}

pub fn compress(data: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(data.len() / 2 + 16), Compression::best());
    enc.write_all(data).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

pub fn decompress(data: &[u8]) -> Result<Vec<u8>, FormatError> {
    let mut inflater = Decompress::new(false);
    let mut out = Vec::with_capacity(data.len().saturating_mul(4).max(64));
    loop {
        let consumed = inflater.total_in() as usize;
        let produced = out.len();
        if out.len() == out.capacity() {
            out.reserve(out.capacity());
        }
        let status = inflater
            .decompress_vec(&data[consumed..], &mut out, FlushDecompress::None)
            .map_err(|e| FormatError::Corrupt(e.to_string()))?;
        let consumed_now = inflater.total_in() as usize;
        if status == Status::StreamEnd {
            return if consumed_now == data.len() {
                Ok(out)
            } else {
                Err(FormatError::TrailingData(data.len() - consumed_now))
            };
        }
        // No progress with spare output space means the input ran out.
        if consumed_now == consumed && out.len() == produced {
            return Err(FormatError::Truncated);
        }
    }
}
