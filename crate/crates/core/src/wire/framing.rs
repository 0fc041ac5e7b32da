//! Length-prefixed framing: `[u32 big-endian length][payload]`.

use std::io::{self, Read, Write};

use super::WireError;

/// Default ceiling on a declared frame length (64 MiB).
pub const DEFAULT_MAX_FRAME: usize = 64 * 1024 * 1024;

pub fn frame(doc: &[u8]) -> Result<Vec<u8>, WireError> {
    let len = u32::try_from(doc.len()).map_err(|_| WireError::Oversize {
        len: doc.len() as u64,
        max: u32::MAX as u64,
    })?;
    let mut out = Vec::with_capacity(4 + doc.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(doc);
    Ok(out)
}

pub fn write_frame<W: Write>(w: &mut W, doc: &[u8]) -> Result<(), WireError> {
    let len = u32::try_from(doc.len()).map_err(|_| WireError::Oversize {
        len: doc.len() as u64,
        max: u32::MAX as u64,
    })?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(doc)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` means the stream ended cleanly on a frame
/// boundary; ending anywhere else is `Truncated`.
pub fn read_frame<R: Read>(r: &mut R, max: usize) -> Result<Option<Vec<u8>>, WireError> {
    let mut header = [0u8; 4];
    let got = read_full(r, &mut header)?;
    if got == 0 {
        return Ok(None);
    }
    if got < header.len() {
        return Err(WireError::Truncated {
            expected: 4,
            got: got as u64,
        });
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > max {
        return Err(WireError::Oversize {
            len: len as u64,
            max: max as u64,
        });
    }
    let mut payload = vec![0u8; len];
    let got = read_full(r, &mut payload)?;
    if got < len {
        return Err(WireError::Truncated {
            expected: len as u64,
            got: got as u64,
        });
    }
    Ok(Some(payload))
}

/// Reads exactly one frame with the default size limit.
pub fn deframe<R: Read>(r: &mut R) -> Result<Vec<u8>, WireError> {
    read_frame(r, DEFAULT_MAX_FRAME)?.ok_or(WireError::Truncated { expected: 4, got: 0 })
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, WireError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}
