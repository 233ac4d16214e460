//! Append-only, hash-chained in-memory ledgers.
//!
//! Every record commits to its predecessor:
//! `record_hash = SHA-256(sequence_no ‖ kind ‖ len(payload) ‖ payload ‖ prev_hash)`
//! with big-endian fixed-width integers. The head digest is the ledger's
//! state hash. [`Ledger::append`] is the only way to add state and nothing
//! hands out a mutable reference to a stored record.

mod canonical;
mod identity;
mod snapshot;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use canonical::{from_canonical, to_canonical};
pub use identity::{Member, NetworkIdentity, NetworkKeyring, Signature, VerificationKey};
pub use snapshot::{Snapshot, SnapshotError, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex chars"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PayloadKind {
    ServiceContract,
    MilestoneEvent,
    PartialInvoice,
    Policy,
    Installment,
    Settlement,
    ImportedInvoice,
    Reward,
    AccuracyReport,
    Repayment,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 10] = [
        PayloadKind::ServiceContract,
        PayloadKind::MilestoneEvent,
        PayloadKind::PartialInvoice,
        PayloadKind::Policy,
        PayloadKind::Installment,
        PayloadKind::Settlement,
        PayloadKind::ImportedInvoice,
        PayloadKind::Reward,
        PayloadKind::AccuracyReport,
        PayloadKind::Repayment,
    ];

    /// Stable one-byte wire code.
    pub fn code(self) -> u8 {
        match self {
            PayloadKind::ServiceContract => 1,
            PayloadKind::MilestoneEvent => 2,
            PayloadKind::PartialInvoice => 3,
            PayloadKind::Policy => 4,
            PayloadKind::Installment => 5,
            PayloadKind::Settlement => 6,
            PayloadKind::ImportedInvoice => 7,
            PayloadKind::Reward => 8,
            PayloadKind::AccuracyReport => 9,
            PayloadKind::Repayment => 10,
        }
    }

    pub fn from_code(code: u8) -> Option<PayloadKind> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerRecord {
    pub sequence_no: u64,
    pub payload_kind: PayloadKind,
    pub payload_bytes: Vec<u8>,
    pub prev_hash: Digest,
    pub record_hash: Digest,
}

impl LedgerRecord {
    pub fn compute_hash(sequence_no: u64, kind: PayloadKind, payload: &[u8], prev_hash: &Digest) -> Digest {
        let mut h = Sha256::new();
        h.update(sequence_no.to_be_bytes());
        h.update([kind.code()]);
        h.update((payload.len() as u32).to_be_bytes());
        h.update(payload);
        h.update(prev_hash.as_bytes());
        Digest(h.finalize().into())
    }

    /// Decode the payload as canonical JSON.
    pub fn decode<T: serde::de::DeserializeOwned>(&self) -> Result<T, LedgerError> {
        from_canonical(&self.payload_bytes)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("payload serialization failed: {0}")]
    Serialization(String),
    #[error("payload does not decode: {0}")]
    Decode(String),
    #[error("record {sequence_no}: {reason}")]
    Chain { sequence_no: u64, reason: ChainFault },
    #[error("invalid network identity: {0}")]
    Identity(String),
    #[error("snapshot belongs to network {found}, expected {expected}")]
    NetworkMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainFault {
    SequenceGap,
    PrevHashMismatch,
    RecordHashMismatch,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainFault::SequenceGap => "sequence number out of order",
            ChainFault::PrevHashMismatch => "prev_hash does not match predecessor",
            ChainFault::RecordHashMismatch => "record_hash does not match contents",
        })
    }
}

/// Rescan a record sequence from genesis and report the first broken link.
pub fn verify_chain(records: &[LedgerRecord]) -> Result<(), LedgerError> {
    let mut prev = Digest::ZERO;
    for (i, r) in records.iter().enumerate() {
        let fault = if r.sequence_no != i as u64 {
            Some(ChainFault::SequenceGap)
        } else if r.prev_hash != prev {
            Some(ChainFault::PrevHashMismatch)
        } else if LedgerRecord::compute_hash(r.sequence_no, r.payload_kind, &r.payload_bytes, &r.prev_hash)
            != r.record_hash
        {
            Some(ChainFault::RecordHashMismatch)
        } else {
            None
        };
        if let Some(reason) = fault {
            return Err(LedgerError::Chain { sequence_no: i as u64, reason });
        }
        prev = r.record_hash;
    }
    Ok(())
}

/// One network's ledger. Single writer; readers borrow.
#[derive(Debug, Clone)]
pub struct Ledger {
    identity: NetworkIdentity,
    records: Vec<LedgerRecord>,
}

impl Ledger {
    pub fn new(identity: NetworkIdentity) -> Self {
        Ledger { identity, records: Vec::new() }
    }

    /// Rebuild a ledger from a snapshot, rejecting any broken link.
    pub fn from_snapshot(identity: NetworkIdentity, snapshot: Snapshot) -> Result<Self, LedgerError> {
        if snapshot.network_id != identity.network_id {
            return Err(LedgerError::NetworkMismatch {
                expected: identity.network_id.clone(),
                found: snapshot.network_id,
            });
        }
        verify_chain(&snapshot.records)?;
        Ok(Ledger { identity, records: snapshot.records })
    }

    pub fn identity(&self) -> &NetworkIdentity {
        &self.identity
    }

    pub fn network_id(&self) -> &str {
        &self.identity.network_id
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn head(&self) -> Option<&LedgerRecord> {
        self.records.last()
    }

    pub fn state_hash(&self) -> Digest {
        self.head().map_or(Digest::ZERO, |r| r.record_hash)
    }

    /// Serialize `payload` canonically and append it.
    pub fn append<T: Serialize>(&mut self, kind: PayloadKind, payload: &T) -> Result<&LedgerRecord, LedgerError> {
        let bytes = to_canonical(payload)?;
        Ok(self.append_bytes(kind, bytes))
    }

    /// Append already-canonical bytes.
    pub fn append_bytes(&mut self, kind: PayloadKind, payload_bytes: Vec<u8>) -> &LedgerRecord {
        let sequence_no = self.records.len() as u64;
        let prev_hash = self.state_hash();
        let record_hash = LedgerRecord::compute_hash(sequence_no, kind, &payload_bytes, &prev_hash);
        self.records.push(LedgerRecord { sequence_no, payload_kind: kind, payload_bytes, prev_hash, record_hash });
        self.records.last().expect("just pushed")
    }

    /// Records of `kind` satisfying `pred`, in sequence order.
    pub fn query<F>(&self, kind: PayloadKind, pred: F) -> Vec<&LedgerRecord>
    where
        F: Fn(&LedgerRecord) -> bool,
    {
        self.records.iter().filter(|r| r.payload_kind == kind && pred(r)).collect()
    }

    pub fn latest<F>(&self, kind: PayloadKind, pred: F) -> Option<&LedgerRecord>
    where
        F: Fn(&LedgerRecord) -> bool,
    {
        self.records.iter().rev().find(|r| r.payload_kind == kind && pred(r))
    }

    pub fn verify(&self) -> Result<(), LedgerError> {
        verify_chain(&self.records)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { network_id: self.identity.network_id.clone(), records: self.records.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ledger() -> Ledger {
        let ring = NetworkKeyring::derive("logistics", &["carrier", "shipper", "port"], 2).unwrap();
        Ledger::new(ring.identity().clone())
    }

    #[test]
    fn genesis_record() {
        let mut l = ledger();
        assert_eq!(l.state_hash(), Digest::ZERO);
        let r = l.append(PayloadKind::Reward, &json!({"amount": 500})).unwrap().clone();
        assert_eq!(r.sequence_no, 0);
        assert_eq!(r.prev_hash, Digest::ZERO);
        assert_eq!(l.state_hash(), r.record_hash);
    }

    #[test]
    fn identical_payloads_hash_differently() {
        let mut l = ledger();
        let a = l.append(PayloadKind::Reward, &json!({"x": 1})).unwrap().record_hash;
        let b = l.append(PayloadKind::Reward, &json!({"x": 1})).unwrap().record_hash;
        assert_ne!(a, b);
        assert_eq!(l.records()[1].prev_hash, a);
    }

    #[test]
    fn replay_is_deterministic() {
        let script = |l: &mut Ledger| {
            for i in 0..10u64 {
                let kind = PayloadKind::ALL[(i as usize) % PayloadKind::ALL.len()];
                l.append(kind, &json!({"i": i, "note": format!("step {i}")})).unwrap();
            }
            l.state_hash()
        };
        let a = script(&mut ledger());
        let b = script(&mut ledger());
        assert_eq!(a, b);
        assert_ne!(a, Digest::ZERO);
    }

    #[test]
    fn query_in_append_order() {
        let mut l = ledger();
        assert!(l.query(PayloadKind::Policy, |_| true).is_empty());
        for i in 0..3 {
            l.append(PayloadKind::Policy, &json!({ "i": i })).unwrap();
            l.append(PayloadKind::Reward, &json!({ "i": i })).unwrap();
        }
        let got: Vec<u64> = l.query(PayloadKind::Policy, |_| true).iter().map(|r| r.sequence_no).collect();
        assert_eq!(got, vec![0, 2, 4]);
    }

    #[test]
    fn verify_names_first_bad_record() {
        let mut l = ledger();
        for i in 0..5 {
            l.append(PayloadKind::Reward, &json!({ "i": i })).unwrap();
        }
        let mut snap = l.snapshot();
        snap.records[3].payload_bytes[0] ^= 1;
        assert_eq!(
            verify_chain(&snap.records),
            Err(LedgerError::Chain { sequence_no: 3, reason: ChainFault::RecordHashMismatch })
        );
        let mut snap = l.snapshot();
        snap.records.remove(2);
        assert!(matches!(verify_chain(&snap.records), Err(LedgerError::Chain { sequence_no: 2, .. })));
    }

    #[test]
    fn kind_codes_round_trip() {
        for k in PayloadKind::ALL {
            assert_eq!(PayloadKind::from_code(k.code()), Some(k));
        }
        assert_eq!(PayloadKind::from_code(0), None);
    }
}
