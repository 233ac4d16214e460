//! Quorum-attested transfer of ledger records between networks.
//!
//! The exporting network's members sign a commitment to the record's
//! payload digest, its kind and the source network id. The importer checks
//! the digest, counts valid signatures from the members it trusts for that
//! network, and only then appends the payload to its own ledger.

mod wire;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{
    from_canonical, to_canonical, Digest, Ledger, LedgerError, LedgerRecord, Member, NetworkIdentity, NetworkKeyring,
    PayloadKind, Signature,
};
use crate::logistics::PartialInvoice;

pub use wire::{decode_message, encode_message, read_frame, read_message, write_frame, write_message, MAX_FRAME_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attestation {
    pub member_id: String,
    pub signature: Signature,
}

/// A record's payload plus the source network's endorsement of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttestedPayload {
    pub source_network_id: String,
    pub payload_kind: PayloadKind,
    #[serde(with = "hex::serde")]
    pub payload_bytes: Vec<u8>,
    pub payload_hash: Digest,
    pub signatures: Vec<Attestation>,
}

/// The bytes each member signs.
pub fn attestation_message(payload_hash: &Digest, kind: PayloadKind, source_network_id: &str) -> Vec<u8> {
    let mut m = Vec::with_capacity(24 + 33 + source_network_id.len());
    m.extend_from_slice(b"freightledger/attest/v1\0");
    m.extend_from_slice(payload_hash.as_bytes());
    m.push(kind.code());
    m.extend_from_slice(source_network_id.as_bytes());
    m
}

impl AttestedPayload {
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        to_canonical(self).expect("attested payload serializes")
    }

    pub fn decode_payload<T: serde::de::DeserializeOwned>(&self) -> Result<T, LedgerError> {
        from_canonical(&self.payload_bytes)
    }
}

/// Foreign network membership as configured by the importing side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchoredNetwork {
    pub members: Vec<Member>,
    pub quorum_threshold: usize,
}

/// Which foreign networks an importer trusts, and on what terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustAnchor {
    pub networks: BTreeMap<String, AnchoredNetwork>,
}

impl TrustAnchor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trust(&mut self, identity: &NetworkIdentity) -> &mut Self {
        self.networks.insert(
            identity.network_id.clone(),
            AnchoredNetwork { members: identity.members.clone(), quorum_threshold: identity.quorum_threshold },
        );
        self
    }

    pub fn validate(&self) -> Result<(), RelayError> {
        for (id, net) in &self.networks {
            if net.quorum_threshold == 0 || net.quorum_threshold > net.members.len() {
                return Err(RelayError::Anchor(format!(
                    "{id}: threshold {} with {} keys",
                    net.quorum_threshold,
                    net.members.len()
                )));
            }
            let distinct: BTreeSet<&str> = net.members.iter().map(|m| m.member_id.as_str()).collect();
            if distinct.len() != net.members.len() {
                return Err(RelayError::Anchor(format!("{id}: duplicate member id")));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<TrustAnchor, RelayError> {
        let a: TrustAnchor = serde_json::from_slice(bytes).map_err(|e| RelayError::Anchor(e.to_string()))?;
        a.validate()?;
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordSelector {
    Sequence(u64),
    Latest(PayloadKind),
    LatestInvoice { shipment_id: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelayError {
    #[error("no record matches {0}")]
    NotFound(String),
    #[error("keyring is for {keyring}, ledger is {ledger}")]
    WrongKeyring { keyring: String, ledger: String },
    #[error("source network {0} is not a trust anchor")]
    UnknownNetwork(String),
    #[error("payload hash mismatch: claimed {claimed}, computed {computed}")]
    HashMismatch { claimed: String, computed: String },
    #[error("member {0} signed more than once")]
    DuplicateSigner(String),
    #[error("{valid} valid signatures from {network}, quorum is {required}{}", fmt_rejects(.rejected))]
    InsufficientSignatures { network: String, valid: usize, required: usize, rejected: Vec<String> },
    #[error("malformed message: {0}")]
    Wire(String),
    #[error("anchor config: {0}")]
    Anchor(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

fn fmt_rejects(r: &[String]) -> String {
    if r.is_empty() {
        String::new()
    } else {
        format!(" (rejected: {})", r.join(", "))
    }
}

fn select<'a>(ledger: &'a Ledger, selector: &RecordSelector) -> Option<&'a LedgerRecord> {
    match selector {
        RecordSelector::Sequence(n) => ledger.records().get(usize::try_from(*n).ok()?),
        RecordSelector::Latest(kind) => ledger.latest(*kind, |_| true),
        RecordSelector::LatestInvoice { shipment_id } => ledger.latest(PayloadKind::PartialInvoice, |r| {
            r.decode::<PartialInvoice>().is_ok_and(|inv| &inv.shipment_id == shipment_id)
        }),
    }
}

/// Package one record for transfer, signed by a quorum of `keyring`.
pub fn export_view(
    ledger: &Ledger,
    keyring: &NetworkKeyring,
    selector: &RecordSelector,
) -> Result<AttestedPayload, RelayError> {
    if keyring.identity().network_id != ledger.network_id() {
        return Err(RelayError::WrongKeyring {
            keyring: keyring.identity().network_id.clone(),
            ledger: ledger.network_id().to_string(),
        });
    }
    let record = select(ledger, selector).ok_or_else(|| RelayError::NotFound(format!("{selector:?}")))?;
    Ok(attest(keyring, record.payload_kind, record.payload_bytes.clone(), keyring.identity().quorum_threshold))
}

/// Sign arbitrary bytes with the first `signers` members. Used by
/// [`export_view`] and by tests that need under-signed payloads.
pub fn attest(keyring: &NetworkKeyring, kind: PayloadKind, payload_bytes: Vec<u8>, signers: usize) -> AttestedPayload {
    let payload_hash = Digest::of(&payload_bytes);
    let network = keyring.identity().network_id.clone();
    let msg = attestation_message(&payload_hash, kind, &network);
    let signatures = keyring
        .sign_first(signers, &msg)
        .into_iter()
        .map(|(member_id, signature)| Attestation { member_id, signature })
        .collect();
    AttestedPayload { source_network_id: network, payload_kind: kind, payload_bytes, payload_hash, signatures }
}

/// What the importing ledger stores for each accepted foreign payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportedPayload {
    pub source_network_id: String,
    pub payload_kind: PayloadKind,
    pub payload_hash: Digest,
    pub signers: Vec<String>,
    pub payload: serde_json::Value,
}

impl ImportedPayload {
    pub fn decode<T: serde::de::DeserializeOwned>(&self) -> Result<T, LedgerError> {
        serde_json::from_value(self.payload.clone()).map_err(|e| LedgerError::Decode(e.to_string()))
    }
}

/// Check `attested` against `anchors` without touching any ledger. Returns
/// the members whose signatures verified.
pub fn verify_attestation(attested: &AttestedPayload, anchors: &TrustAnchor) -> Result<Vec<String>, RelayError> {
    let net = anchors
        .networks
        .get(&attested.source_network_id)
        .ok_or_else(|| RelayError::UnknownNetwork(attested.source_network_id.clone()))?;
    let computed = Digest::of(&attested.payload_bytes);
    if computed != attested.payload_hash {
        return Err(RelayError::HashMismatch { claimed: attested.payload_hash.to_hex(), computed: computed.to_hex() });
    }
    let mut seen = BTreeSet::new();
    for a in &attested.signatures {
        if !seen.insert(a.member_id.as_str()) {
            return Err(RelayError::DuplicateSigner(a.member_id.clone()));
        }
    }
    let msg = attestation_message(&attested.payload_hash, attested.payload_kind, &attested.source_network_id);
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for a in &attested.signatures {
        match net.members.iter().find(|m| m.member_id == a.member_id) {
            None => rejected.push(format!("{}: not a member", a.member_id)),
            Some(m) if !m.verification_key.verify(&msg, &a.signature) => {
                rejected.push(format!("{}: bad signature", a.member_id))
            }
            Some(_) => valid.push(a.member_id.clone()),
        }
    }
    if valid.len() < net.quorum_threshold {
        return Err(RelayError::InsufficientSignatures {
            network: attested.source_network_id.clone(),
            valid: valid.len(),
            required: net.quorum_threshold,
            rejected,
        });
    }
    Ok(valid)
}

/// Sequence number of an earlier import of the same payload, if any.
pub fn find_import(ledger: &Ledger, payload_hash: &Digest) -> Option<u64> {
    ledger
        .query(PayloadKind::ImportedInvoice, |_| true)
        .into_iter()
        .find(|r| r.decode::<ImportedPayload>().is_ok_and(|p| &p.payload_hash == payload_hash))
        .map(|r| r.sequence_no)
}

/// Verify, then append an `ImportedInvoice` record. Importing the same
/// payload again returns the existing record.
pub fn verify_and_import(
    ledger: &mut Ledger,
    attested: &AttestedPayload,
    anchors: &TrustAnchor,
) -> Result<LedgerRecord, RelayError> {
    let signers = verify_attestation(attested, anchors)?;
    if let Some(seq) = find_import(ledger, &attested.payload_hash) {
        return Ok(ledger.records()[seq as usize].clone());
    }
    let payload: serde_json::Value =
        from_canonical(&attested.payload_bytes).map_err(|e| RelayError::Wire(format!("payload: {e}")))?;
    let record = ImportedPayload {
        source_network_id: attested.source_network_id.clone(),
        payload_kind: attested.payload_kind,
        payload_hash: attested.payload_hash,
        signers,
        payload,
    };
    Ok(ledger.append(PayloadKind::ImportedInvoice, &record)?.clone())
}
