use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::finance::FactoringPolicy;
use crate::ledger::NetworkKeyring;
use crate::logistics::{EventStatus, Milestone, MilestoneEvent, ServiceContract, ShippingLane};
use crate::prediction::{AccuracyRegistry, DwellModel, PredictedValue, ShipmentContext, SourceWeights, ThresholdModels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    OpenAccount,
    ClassicFactoring,
    AcceleratedFactoring,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::OpenAccount, Method::ClassicFactoring, Method::AcceleratedFactoring];

    pub fn slug(self) -> &'static str {
        match self {
            Method::OpenAccount => "open-account",
            Method::ClassicFactoring => "classic",
            Method::AcceleratedFactoring => "accelerated",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "open-account" | "openaccount" | "open" => Ok(Method::OpenAccount),
            "classic" | "classic-factoring" | "classicfactoring" => Ok(Method::ClassicFactoring),
            "accelerated" | "accelerated-factoring" | "acceleratedfactoring" => Ok(Method::AcceleratedFactoring),
            other => Err(format!("unknown method {other:?} (open-account, classic, accelerated)")),
        }
    }
}

fn default_open_account_days() -> i64 {
    60
}

fn one_day() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Calendar date of hour 0, `YYYY-MM-DD`. Informational only.
    pub epoch: String,
    pub seed: u64,
    /// Shipper pays this many days after delivery.
    #[serde(default = "default_open_account_days")]
    pub open_account_days: i64,
    /// Classic factoring pays this many days after delivery.
    #[serde(default = "one_day")]
    pub classic_payout_days: i64,
    /// Accelerated factoring settles this many days after delivery.
    #[serde(default = "one_day")]
    pub settlement_days: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub network_id: String,
    pub members: Vec<String>,
    pub quorum_threshold: usize,
}

impl NetworkSpec {
    pub fn keyring(&self) -> Result<NetworkKeyring, SimError> {
        let ids: Vec<&str> = self.members.iter().map(String::as_str).collect();
        NetworkKeyring::derive(&self.network_id, &ids, self.quorum_threshold)
            .map_err(|e| SimError::Invalid(format!("network {}: {e}", self.network_id)))
    }
}

/// Membership of the two networks. Keys are derived from the ids, and the
/// finance network trusts the logistics network's members at its quorum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchors {
    pub logistics: NetworkSpec,
    pub finance: NetworkSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipmentSpec {
    pub shipment_id: String,
    #[serde(default)]
    pub context: ShipmentContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractEntry {
    pub contract: ServiceContract,
    pub shipments: Vec<ShipmentSpec>,
}

/// Three threshold classifiers (24/48/72h) that price one dwell charge
/// when the given milestone occurs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    pub lane_id: String,
    pub milestone: Milestone,
    pub port: String,
    pub charge_code: String,
    /// Model files, relative to the scenario file.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    #[serde(default)]
    pub source_weights: SourceWeights,
    /// Accuracy the AI service reports to the bank.
    #[serde(default)]
    pub registry: AccuracyRegistry,
    /// Fixed predictions, each published when its milestone actually occurs.
    #[serde(default)]
    pub predictions: Vec<PredictedValue>,
    #[serde(default)]
    pub models: Vec<ModelRef>,
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub port: String,
    pub charge_code: String,
    pub models: ThresholdModels,
}

/// Classifiers resolved from [`ModelRef`]s, keyed by lane and milestone.
#[derive(Debug, Clone, Default)]
pub struct ModelBank {
    pub by_trigger: BTreeMap<(String, Milestone), Vec<LoadedModel>>,
}

impl ModelBank {
    pub fn is_empty(&self) -> bool {
        self.by_trigger.is_empty()
    }

    pub fn insert(&mut self, r: &ModelRef, models: ThresholdModels) {
        self.by_trigger.entry((r.lane_id.clone(), r.milestone.clone())).or_default().push(LoadedModel {
            port: r.port.clone(),
            charge_code: r.charge_code.clone(),
            models,
        });
    }

    pub fn for_trigger(&self, lane_id: &str, m: &Milestone) -> &[LoadedModel] {
        self.by_trigger.get(&(lane_id.to_string(), m.clone())).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub meta: Meta,
    pub lanes: Vec<ShippingLane>,
    pub contracts: Vec<ContractEntry>,
    #[serde(default)]
    pub policies: Vec<FactoringPolicy>,
    pub anchors: Anchors,
    /// Emissions in the order they reach the ledger.
    pub events: Vec<MilestoneEvent>,
    #[serde(default)]
    pub predictor: PredictorConfig,
    pub method: Method,
    #[serde(skip)]
    pub models: ModelBank,
}

/// Where a shipment lives in a scenario.
#[derive(Debug, Clone, Copy)]
pub struct ShipmentRef<'a> {
    pub contract: &'a ServiceContract,
    pub lane: &'a ShippingLane,
    pub spec: &'a ShipmentSpec,
}

impl Scenario {
    /// Parse and validate. Model references are not resolved; see [`Scenario::from_path`].
    pub fn from_json(text: &str) -> Result<Scenario, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::Load(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Read a scenario file and load the models it references.
    pub fn from_path(path: &Path) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Load(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for r in s.predictor.models.clone() {
            let mut loaded = Vec::new();
            for f in &r.files {
                let p = base.join(f);
                let bytes = std::fs::read(&p).map_err(|e| SimError::Load(format!("{}: {e}", p.display())))?;
                loaded.push(DwellModel::from_bytes(&bytes).map_err(|e| SimError::Load(format!("{}: {e}", p.display())))?);
            }
            let models = ThresholdModels::new(loaded).map_err(|e| SimError::Load(e.to_string()))?;
            s.models.insert(&r, models);
        }
        Ok(s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn lane(&self, lane_id: &str) -> Option<&ShippingLane> {
        self.lanes.iter().find(|l| l.lane_id == lane_id)
    }

    pub fn shipment(&self, shipment_id: &str) -> Option<ShipmentRef<'_>> {
        self.contracts.iter().find_map(|c| {
            let spec = c.shipments.iter().find(|s| s.shipment_id == shipment_id)?;
            let lane = self.lane(&c.contract.lane_id)?;
            Some(ShipmentRef { contract: &c.contract, lane, spec })
        })
    }

    pub fn shipment_ids(&self) -> impl Iterator<Item = &str> {
        self.contracts.iter().flat_map(|c| c.shipments.iter().map(|s| s.shipment_id.as_str()))
    }

    pub fn policy_for(&self, carrier_id: &str, lane_id: &str) -> Option<&FactoringPolicy> {
        self.policies.iter().find(|p| p.carrier_id == carrier_id && p.lane_id == lane_id)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::Invalid(m));
        if !valid_date(&self.meta.epoch) {
            return invalid(format!("meta.epoch {:?} is not YYYY-MM-DD", self.meta.epoch));
        }
        if self.meta.open_account_days < 0 || self.meta.classic_payout_days < 0 || self.meta.settlement_days < 0 {
            return invalid("payment terms must be non-negative".into());
        }
        let mut lane_ids = BTreeSet::new();
        for l in &self.lanes {
            l.validate()?;
            if !lane_ids.insert(l.lane_id.as_str()) {
                return invalid(format!("lane {} defined twice", l.lane_id));
            }
        }
        let mut contract_ids = BTreeSet::new();
        let mut shipment_ids = BTreeSet::new();
        for c in &self.contracts {
            let lane = self
                .lane(&c.contract.lane_id)
                .ok_or_else(|| SimError::Invalid(format!("contract {}: unknown lane {}", c.contract.contract_id, c.contract.lane_id)))?;
            c.contract.validate(lane)?;
            if !contract_ids.insert(c.contract.contract_id.as_str()) {
                return invalid(format!("contract {} defined twice", c.contract.contract_id));
            }
            for s in &c.shipments {
                if !shipment_ids.insert(s.shipment_id.as_str()) {
                    return invalid(format!("shipment {} appears twice", s.shipment_id));
                }
            }
        }
        let mut policy_keys = BTreeSet::new();
        for p in &self.policies {
            p.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
            if !self.contracts.iter().any(|c| c.contract.carrier_id == p.carrier_id && c.contract.lane_id == p.lane_id) {
                return invalid(format!("policy {}: no contract for carrier {} on lane {}", p.policy_id, p.carrier_id, p.lane_id));
            }
            if !policy_keys.insert((p.carrier_id.as_str(), p.lane_id.as_str())) {
                return invalid(format!("two policies for carrier {} on lane {}", p.carrier_id, p.lane_id));
            }
        }
        self.anchors.logistics.keyring()?;
        self.anchors.finance.keyring()?;
        if self.anchors.logistics.network_id == self.anchors.finance.network_id {
            return invalid("logistics and finance networks need distinct ids".into());
        }

        let mut last_emit = i64::MIN;
        for (i, e) in self.events.iter().enumerate() {
            let Some(sh) = self.shipment(&e.shipment_id) else {
                return invalid(format!("event {i}: unknown shipment {}", e.shipment_id));
            };
            if !sh.lane.covers(&e.milestone) {
                return invalid(format!("event {i}: {} is not on lane {}", e.milestone, sh.lane.lane_id));
            }
            if e.emitted_at < last_emit {
                return invalid(format!("event {i}: emitted_at {} is earlier than the event before it", e.emitted_at));
            }
            if e.status == EventStatus::Actual && e.occurrence_time > e.emitted_at {
                return invalid(format!("event {i}: actual {} reported before it happened", e.milestone));
            }
            last_emit = e.emitted_at;
        }
        for p in &self.predictor.predictions {
            p.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
            let Some(sh) = self.shipment(&p.shipment_id) else {
                return invalid(format!("prediction for unknown shipment {}", p.shipment_id));
            };
            if let Some(code) = &p.charge_code {
                if sh.contract.charge(code).is_none() {
                    return invalid(format!("prediction for {}: unknown charge {code}", p.shipment_id));
                }
            }
        }
        for r in &self.predictor.models {
            let Some(lane) = self.lane(&r.lane_id) else {
                return invalid(format!("model reference to unknown lane {}", r.lane_id));
            };
            if lane.port_index(&r.port).is_none() || !lane.port_events().contains(&r.milestone) {
                return invalid(format!("model reference {} / {} does not fit lane {}", r.milestone, r.port, r.lane_id));
            }
            if r.files.len() != 3 {
                return invalid(format!("model reference for {} needs 3 files (24/48/72h)", r.milestone));
            }
        }
        Ok(())
    }
}

fn valid_date(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    let [y, m, d] = parts.as_slice() else {
        return false;
    };
    let num = |x: &str, len: usize| x.len() == len && x.chars().all(|c| c.is_ascii_digit());
    if !(num(y, 4) && num(m, 2) && num(d, 2)) {
        return false;
    }
    let (m, d): (u32, u32) = (m.parse().unwrap_or(0), d.parse().unwrap_or(0));
    (1..=12).contains(&m) && (1..=31).contains(&d)
}
