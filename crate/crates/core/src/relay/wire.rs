//! Framing: `len: u32 BE | canonical AttestedPayload bytes`.
//!
//! Decoding insists the body is exactly the canonical encoding of what it
//! parses to, so two distinct byte strings never decode to the same message.

use std::io::{self, Read, Write};

use super::{AttestedPayload, RelayError};
use crate::ledger::from_canonical;

pub const MAX_FRAME_LEN: u32 = 16 << 20;

pub fn encode_message(payload: &AttestedPayload) -> Vec<u8> {
    let body = payload.to_canonical_bytes();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decode one whole frame. Trailing bytes are an error.
pub fn decode_message(bytes: &[u8]) -> Result<AttestedPayload, RelayError> {
    let (len, body) = bytes.split_first_chunk::<4>().ok_or_else(|| RelayError::Wire("short length prefix".into()))?;
    let len = u32::from_be_bytes(*len) as usize;
    if body.len() != len {
        return Err(RelayError::Wire(format!("length prefix {len}, body {}", body.len())));
    }
    decode_body(body)
}

fn decode_body(body: &[u8]) -> Result<AttestedPayload, RelayError> {
    let p: AttestedPayload = from_canonical(body).map_err(|e| RelayError::Wire(e.to_string()))?;
    if p.to_canonical_bytes() != body {
        return Err(RelayError::Wire("body is not in canonical form".into()));
    }
    Ok(p)
}

pub fn write_frame<W: Write>(mut w: W, body: &[u8]) -> io::Result<()> {
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

pub fn read_frame<R: Read>(mut r: R) -> io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(body)
}

pub fn write_message<W: Write>(w: W, payload: &AttestedPayload) -> io::Result<()> {
    write_frame(w, &payload.to_canonical_bytes())
}

pub fn read_message<R: Read>(r: R) -> Result<AttestedPayload, RelayError> {
    let body = read_frame(r).map_err(|e| RelayError::Wire(e.to_string()))?;
    decode_body(&body)
}
