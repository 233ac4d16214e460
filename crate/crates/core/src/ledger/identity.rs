use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::LedgerError;

/// Ed25519 public key, carried as opaque bytes in config.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct VerificationKey(pub [u8; 32]);

/// Detached Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl VerificationKey {
    pub fn verify(&self, message: &[u8], sig: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        key.verify_strict(message, &sig).is_ok()
    }
}

macro_rules! hex_serde {
    ($ty:ident, $len:expr) => {
        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}…)", stringify!($ty), &hex::encode(self.0)[..12])
            }
        }

        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                let mut out = [0u8; $len];
                hex::decode_to_slice(&s, &mut out)
                    .map_err(|_| serde::de::Error::custom(concat!("expected ", $len, " hex-encoded bytes")))?;
                Ok($ty(out))
            }
        }
    };
}

hex_serde!(VerificationKey, 32);
hex_serde!(Signature, 64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    pub member_id: String,
    pub verification_key: VerificationKey,
}

/// Public membership of a network: who may attest, and how many must.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkIdentity {
    pub network_id: String,
    pub members: Vec<Member>,
    pub quorum_threshold: usize,
}

impl NetworkIdentity {
    pub fn validate(&self) -> Result<(), LedgerError> {
        let n = self.members.len();
        if self.network_id.is_empty() {
            return Err(LedgerError::Identity("empty network_id".into()));
        }
        if n == 0 {
            return Err(LedgerError::Identity(format!("{}: no members", self.network_id)));
        }
        let majority = n / 2 + 1;
        if self.quorum_threshold < majority || self.quorum_threshold > n {
            return Err(LedgerError::Identity(format!(
                "{}: quorum {} must be a strict majority of {} members ({}..={})",
                self.network_id, self.quorum_threshold, n, majority, n
            )));
        }
        let mut ids: Vec<&str> = self.members.iter().map(|m| m.member_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(LedgerError::Identity(format!("{}: duplicate member id", self.network_id)));
        }
        Ok(())
    }

    pub fn key_of(&self, member_id: &str) -> Option<&VerificationKey> {
        self.members.iter().find(|m| m.member_id == member_id).map(|m| &m.verification_key)
    }
}

/// Signing side of a simulated network. Keys are derived from the network
/// and member ids so that every run produces the same signatures.
#[derive(Clone)]
pub struct NetworkKeyring {
    identity: NetworkIdentity,
    signers: Vec<(String, SigningKey)>,
}

impl fmt::Debug for NetworkKeyring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NetworkKeyring").field("identity", &self.identity).finish_non_exhaustive()
    }
}

impl NetworkKeyring {
    pub fn derive(network_id: &str, member_ids: &[&str], quorum_threshold: usize) -> Result<Self, LedgerError> {
        let signers: Vec<(String, SigningKey)> = member_ids
            .iter()
            .map(|id| {
                let mut h = Sha256::new();
                h.update(b"freightledger/member-key/v1\0");
                h.update(network_id.as_bytes());
                h.update([0]);
                h.update(id.as_bytes());
                let seed: [u8; 32] = h.finalize().into();
                (id.to_string(), SigningKey::from_bytes(&seed))
            })
            .collect();
        let identity = NetworkIdentity {
            network_id: network_id.to_string(),
            members: signers
                .iter()
                .map(|(id, k)| Member {
                    member_id: id.clone(),
                    verification_key: VerificationKey(k.verifying_key().to_bytes()),
                })
                .collect(),
            quorum_threshold,
        };
        identity.validate()?;
        Ok(NetworkKeyring { identity, signers })
    }

    pub fn identity(&self) -> &NetworkIdentity {
        &self.identity
    }

    /// Signatures from the first `count` members.
    pub fn sign_first(&self, count: usize, message: &[u8]) -> Vec<(String, Signature)> {
        self.signers
            .iter()
            .take(count)
            .map(|(id, key)| (id.clone(), Signature(key.sign(message).to_bytes())))
            .collect()
    }

    pub fn sign_quorum(&self, message: &[u8]) -> Vec<(String, Signature)> {
        self.sign_first(self.identity.quorum_threshold, message)
    }
}
