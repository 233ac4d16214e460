//! Snapshot file layout (all integers big-endian):
//!
//! ```text
//! header : "FLGR" | version: u16 = 1 | id_len: u16 | network_id: id_len bytes (UTF-8)
//! record*: body_len: u32 | body
//! body   : sequence_no: u64 | kind: u8 | payload_len: u32 | payload | prev_hash: 32 | record_hash: 32
//! ```
//!
//! Decoding checks framing only. Chain integrity is a separate rescan
//! ([`super::verify_chain`]) so that a tampered file can still be loaded and
//! the offending record named.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Digest, LedgerRecord, PayloadKind};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"FLGR";
pub const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub network_id: String,
    pub records: Vec<LedgerRecord>,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a ledger snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u16),
    #[error("truncated snapshot at byte {0}")]
    Truncated(usize),
    #[error("record {index}: malformed body ({reason})")]
    Malformed { index: usize, reason: &'static str },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Snapshot {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_be_bytes());
        let id = self.network_id.as_bytes();
        out.extend_from_slice(&(id.len() as u16).to_be_bytes());
        out.extend_from_slice(id);
        for r in &self.records {
            let body_len = 8 + 1 + 4 + r.payload_bytes.len() + 32 + 32;
            out.extend_from_slice(&(body_len as u32).to_be_bytes());
            out.extend_from_slice(&r.sequence_no.to_be_bytes());
            out.push(r.payload_kind.code());
            out.extend_from_slice(&(r.payload_bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&r.payload_bytes);
            out.extend_from_slice(r.prev_hash.as_bytes());
            out.extend_from_slice(r.record_hash.as_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = cur.u16()?;
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(version));
        }
        let id_len = cur.u16()? as usize;
        let network_id = String::from_utf8(cur.take(id_len)?.to_vec())
            .map_err(|_| SnapshotError::Malformed { index: 0, reason: "network_id is not UTF-8" })?;

        let mut records = Vec::new();
        while cur.pos < bytes.len() {
            let index = records.len();
            let body_len = cur.u32()? as usize;
            let body = cur.take(body_len)?;
            records.push(decode_body(index, body)?);
        }
        Ok(Snapshot { network_id, records })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&self.encode())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Snapshot, SnapshotError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Snapshot::decode(&buf)
    }
}

fn decode_body(index: usize, body: &[u8]) -> Result<LedgerRecord, SnapshotError> {
    let malformed = |reason| SnapshotError::Malformed { index, reason };
    if body.len() < 8 + 1 + 4 + 64 {
        return Err(malformed("body too short"));
    }
    let sequence_no = u64::from_be_bytes(body[0..8].try_into().unwrap());
    let payload_kind = PayloadKind::from_code(body[8]).ok_or_else(|| malformed("unknown payload kind"))?;
    let payload_len = u32::from_be_bytes(body[9..13].try_into().unwrap()) as usize;
    if body.len() != 13 + payload_len + 64 {
        return Err(malformed("payload length disagrees with body length"));
    }
    let payload_bytes = body[13..13 + payload_len].to_vec();
    let rest = &body[13 + payload_len..];
    let prev_hash = Digest(rest[..32].try_into().unwrap());
    let record_hash = Digest(rest[32..].try_into().unwrap());
    Ok(LedgerRecord { sequence_no, payload_kind, payload_bytes, prev_hash, record_hash })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(SnapshotError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, SnapshotError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}
