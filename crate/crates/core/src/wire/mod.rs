//! XML envelopes exchanged between the client and server controllers, and
//! the length-prefixed framing that carries them over a byte stream.

mod framing;
mod types;
mod xml;

use thiserror::Error;

pub use framing::{deframe, frame, read_frame, write_frame, DEFAULT_MAX_FRAME};
pub use types::{
    is_valid_table_name, ErrorCode, Query, Record, RequestEnvelope, ResponseEnvelope, Source, Status,
};
pub use xml::{decode_request, decode_response, encode_request, encode_response, escape};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("stream truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("frame of {len} bytes exceeds the {max} byte limit")]
    Oversize { len: u64, max: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
