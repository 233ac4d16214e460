use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EventStatus, Hours, LogisticsError, Milestone, ShippingLane, Timeline};
use crate::money::Cents;

pub const BASE_PER_DAY: &str = "base_per_day";
pub const INCREMENT_PER_DAY: &str = "increment_per_day";
pub const FLAT_AMOUNT: &str = "flat_amount";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanKind {
    /// Applies to every shipment.
    Planned,
    /// Applies only once its trigger events occur.
    Unplanned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompKind {
    /// A contract rate, no event data needed.
    Fixed,
    /// Computed from contract rates and tracking events. The only variable
    /// formula implemented is the escalating dwell excess fee.
    Variable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeDefinition {
    pub charge_code: String,
    pub plan_kind: PlanKind,
    pub comp_kind: CompKind,
    pub rate_params: BTreeMap<String, Cents>,
    /// For unplanned charges, the milestone whose occurrence triggers it.
    /// Variable charges read their port from here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<Milestone>,
}

impl ChargeDefinition {
    pub fn param(&self, name: &str) -> Option<Cents> {
        self.rate_params.get(name).copied()
    }

    /// Port whose dwell a variable charge is computed from.
    pub fn dwell_port(&self) -> Option<&str> {
        self.trigger.as_ref().and_then(Milestone::port)
    }

    pub fn validate(&self, lane: &ShippingLane) -> Result<(), LogisticsError> {
        let bad = |why: &str| {
            Err(LogisticsError::InvalidCharge { charge_code: self.charge_code.clone(), reason: why.to_string() })
        };
        if self.charge_code.is_empty() {
            return bad("empty charge code");
        }
        if self.rate_params.values().any(|c| c.0 < 0) {
            return bad("rates must be non-negative");
        }
        match self.comp_kind {
            CompKind::Fixed => {
                if self.param(FLAT_AMOUNT).is_none() {
                    return bad("fixed charge needs flat_amount");
                }
            }
            CompKind::Variable => {
                let positive = |n| self.param(n).is_some_and(|c| c.0 > 0);
                if !positive(BASE_PER_DAY) || !positive(INCREMENT_PER_DAY) {
                    return bad("dwell fee needs positive base_per_day and increment_per_day");
                }
                match self.dwell_port() {
                    Some(p) if lane.dwell_limit(p).is_some() && p != lane.origin() => {}
                    _ => return bad("variable charge needs a trigger at a transshipment port of the lane"),
                }
            }
        }
        if self.plan_kind == PlanKind::Unplanned && self.trigger.is_none() {
            return bad("unplanned charge needs a trigger milestone");
        }
        if let Some(t) = &self.trigger {
            if !lane.covers(t) {
                return bad("trigger milestone is not on the lane");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceContract {
    pub contract_id: String,
    pub shipper_id: String,
    pub carrier_id: String,
    pub lane_id: String,
    pub charges: Vec<ChargeDefinition>,
    pub currency: String,
}

impl ServiceContract {
    pub fn validate(&self, lane: &ShippingLane) -> Result<(), LogisticsError> {
        if self.lane_id != lane.lane_id {
            return Err(LogisticsError::InvalidContract {
                contract_id: self.contract_id.clone(),
                reason: format!("contract lane {} does not match {}", self.lane_id, lane.lane_id),
            });
        }
        if self.currency.len() != 3 || !self.currency.chars().all(|c| c.is_ascii_uppercase()) {
            return Err(LogisticsError::InvalidContract {
                contract_id: self.contract_id.clone(),
                reason: format!("currency {:?} is not a 3-letter code", self.currency),
            });
        }
        let mut codes: Vec<&str> = self.charges.iter().map(|c| c.charge_code.as_str()).collect();
        codes.sort_unstable();
        if let Some(w) = codes.windows(2).find(|w| w[0] == w[1]) {
            return Err(LogisticsError::InvalidContract {
                contract_id: self.contract_id.clone(),
                reason: format!("charge code {} appears twice", w[0]),
            });
        }
        self.charges.iter().try_for_each(|c| c.validate(lane))
    }

    pub fn charge(&self, code: &str) -> Option<&ChargeDefinition> {
        self.charges.iter().find(|c| c.charge_code == code)
    }
}

/// Escalating fee for days past the free limit: day `limit+1` costs `base`,
/// each later day `increment` more than the one before.
///
/// Closed form `n·base + increment·n(n−1)/2` with `n = max(0, dwell − limit)`.
pub fn dwell_excess_fee(dwell_days: u32, limit_days: u32, base_per_day: Cents, increment_per_day: Cents) -> Cents {
    let n = dwell_days.saturating_sub(limit_days) as i64;
    Cents(n * base_per_day.0 + increment_per_day.0 * (n * (n - 1) / 2))
}

/// Billing days for a dwell: any started day counts (`⌈hours / 24⌉`).
pub fn dwell_days(hours: Hours) -> u32 {
    (hours.max(0) as u64).div_ceil(24) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DwellMeasurement {
    pub hours: Hours,
    /// `None` when the two endpoints had to come from different statuses.
    pub status: Option<EventStatus>,
}

impl DwellMeasurement {
    pub fn days(&self) -> u32 {
        dwell_days(self.hours)
    }

    pub fn confidence(&self) -> f64 {
        match self.status {
            Some(EventStatus::Actual) => 1.0,
            Some(_) => 0.75,
            None => 0.5,
        }
    }
}

/// Time between vessel arrival at and departure from `port`.
///
/// Both endpoints come from the same status class when possible, preferring
/// Actual, then Estimated, then Planned. If no single class covers both, the
/// best available status per endpoint is used and the measurement is marked
/// mixed.
pub fn dwell_time(timeline: &Timeline, shipment_id: &str, port: &str) -> Result<Option<DwellMeasurement>, LogisticsError> {
    let arrival = Milestone::VesselArrival(port.to_string());
    let departure = Milestone::VesselDeparture(port.to_string());
    let pick = |m: &Milestone, st| timeline.latest(shipment_id, m, st).map(|e| e.occurrence_time);
    const ORDER: [EventStatus; 3] = [EventStatus::Actual, EventStatus::Estimated, EventStatus::Planned];

    let mut found = None;
    for st in ORDER {
        if let (Some(a), Some(d)) = (pick(&arrival, st), pick(&departure, st)) {
            found = Some((a, d, Some(st)));
            break;
        }
    }
    if found.is_none() {
        let best = |m: &Milestone| ORDER.iter().find_map(|&st| pick(m, st));
        if let (Some(a), Some(d)) = (best(&arrival), best(&departure)) {
            found = Some((a, d, None));
        }
    }
    let Some((a, d, status)) = found else {
        return Ok(None);
    };
    if d < a {
        return Err(LogisticsError::NegativeDwell {
            shipment_id: shipment_id.to_string(),
            port: port.to_string(),
            arrival: a,
            departure: d,
        });
    }
    Ok(Some(DwellMeasurement { hours: d - a, status }))
}
