use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{aggregate_estimate, PredictionError, SourceWeights, AI_SOURCE};
use crate::logistics::{EventStatus, Milestone, ShippingLane, Timeline};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselInfo {
    pub age_years: f64,
    pub length_m: f64,
    pub tonnage: f64,
    pub capacity_teu: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortOps {
    pub berths: f64,
    pub expected_vessels: f64,
    pub vessels_in_port: f64,
}

/// Static per-shipment data the timeline does not carry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipmentContext {
    #[serde(default)]
    pub vessel: VesselInfo,
    #[serde(default)]
    pub port_ops: BTreeMap<String, PortOps>,
}

/// Features for one port event of a journey leg `from → to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub origin_port_onehot: Vec<f64>,
    pub destination_port_onehot: Vec<f64>,
    /// 0 = departure, 1 = arrival.
    pub event_type: f64,
    /// Planned voyage time of the leg for departures, planned dwell at the port for arrivals.
    pub planned_voyage_or_dwell_hours: f64,
    pub estimated_delay_final_arrival_hours: f64,
    /// Delay at the leg's destination port; the actual delay once the vessel has arrived.
    pub estimated_delay_next_port_hours: f64,
    pub vessel_features: [f64; 4],
    pub port_ops_features: [f64; 3],
}

impl FeatureVector {
    pub fn dim(port_count: usize) -> usize {
        2 * port_count + 1 + 3 + 4 + 3
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.origin_port_onehot.len() * 2 + 11);
        v.extend_from_slice(&self.origin_port_onehot);
        v.extend_from_slice(&self.destination_port_onehot);
        v.push(self.event_type);
        v.push(self.planned_voyage_or_dwell_hours);
        v.push(self.estimated_delay_final_arrival_hours);
        v.push(self.estimated_delay_next_port_hours);
        v.extend_from_slice(&self.vessel_features);
        v.extend_from_slice(&self.port_ops_features);
        v
    }
}

/// The feature sequence for a shipment as seen right after `at_milestone`.
///
/// One vector per port event of the journey up to and including
/// `at_milestone`. Each vector is computed from what had been emitted when
/// its own event was actually reported, so the sequence at a later milestone
/// extends the earlier one without rewriting it.
pub fn extract_features(
    timeline: &Timeline,
    lane: &ShippingLane,
    shipment_id: &str,
    at_milestone: &Milestone,
    context: &ShipmentContext,
) -> Result<Vec<FeatureVector>, PredictionError> {
    let events = lane.port_events();
    let mismatch = || PredictionError::LaneMismatch { lane_id: lane.lane_id.clone(), milestone: at_milestone.clone() };
    let upto = events.iter().position(|m| m == at_milestone).ok_or_else(mismatch)?;
    if timeline.actual(shipment_id, at_milestone).is_none() {
        return Err(PredictionError::NotOccurred { shipment_id: shipment_id.into(), milestone: at_milestone.clone() });
    }

    let mut out = Vec::with_capacity(upto + 1);
    for m in &events[..=upto] {
        let reported = timeline
            .actual(shipment_id, m)
            .ok_or_else(|| PredictionError::NotOccurred { shipment_id: shipment_id.into(), milestone: m.clone() })?;
        let view = timeline.as_of(reported.emitted_at);
        out.push(vector_for(&view, lane, shipment_id, m, &events, context)?);
    }
    Ok(out)
}

fn vector_for(
    view: &Timeline,
    lane: &ShippingLane,
    shipment_id: &str,
    m: &Milestone,
    journey: &[Milestone],
    context: &ShipmentContext,
) -> Result<FeatureVector, PredictionError> {
    let port = m.port().expect("port events only");
    let idx = lane.port_index(port).expect("lane port");
    let (from, to, is_arrival) = match m {
        Milestone::VesselDeparture(_) => (idx, idx + 1, false),
        _ => (idx - 1, idx, true),
    };
    let to_code = &lane.ports[to].port_code;
    let planned = |m: &Milestone| -> Result<f64, PredictionError> {
        view.planned(shipment_id, m)
            .map(|e| e.occurrence_time as f64)
            .ok_or_else(|| PredictionError::MissingPlan { shipment_id: shipment_id.into(), milestone: m.clone() })
    };

    // Schedule slip of the latest event that has both a plan and an actual.
    let mut slip = 0.0;
    for j in journey {
        if let (Some(a), Some(p)) = (view.actual(shipment_id, j), view.planned(shipment_id, j)) {
            slip = (a.occurrence_time - p.occurrence_time) as f64;
        }
    }
    let estimate = |m: &Milestone| -> Result<f64, PredictionError> {
        if let Some(a) = view.actual(shipment_id, m) {
            return Ok(a.occurrence_time as f64);
        }
        let ests = view.by_source(shipment_id, m, EventStatus::Estimated);
        let pairs: Vec<(&str, f64)> = ests
            .iter()
            .filter(|e| e.source != AI_SOURCE)
            .map(|e| (e.source.as_str(), e.occurrence_time as f64))
            .collect();
        let fallback = planned(m)? + slip;
        Ok(aggregate_estimate(&pairs, &SourceWeights::default(), Some(fallback)).unwrap_or(fallback))
    };

    let final_arrival = Milestone::VesselArrival(lane.destination().to_string());
    let next_arrival = Milestone::VesselArrival(to_code.clone());
    let delay_final = estimate(&final_arrival)? - planned(&final_arrival)?;
    let delay_next = estimate(&next_arrival)? - planned(&next_arrival)?;
    let planned_span = if is_arrival {
        if to + 1 < lane.ports.len() {
            planned(&Milestone::VesselDeparture(to_code.clone()))? - planned(&next_arrival)?
        } else {
            0.0
        }
    } else {
        planned(&next_arrival)? - planned(&Milestone::VesselDeparture(lane.ports[from].port_code.clone()))?
    };

    let onehot = |i: usize| {
        let mut v = vec![0.0; lane.ports.len()];
        v[i] = 1.0;
        v
    };
    let v = &context.vessel;
    let ops = context.port_ops.get(to_code).copied().unwrap_or_default();
    Ok(FeatureVector {
        origin_port_onehot: onehot(from),
        destination_port_onehot: onehot(to),
        event_type: if is_arrival { 1.0 } else { 0.0 },
        planned_voyage_or_dwell_hours: planned_span,
        estimated_delay_final_arrival_hours: delay_final,
        estimated_delay_next_port_hours: delay_next,
        vessel_features: [v.age_years, v.length_m, v.tonnage, v.capacity_teu],
        port_ops_features: [ops.berths, ops.expected_vessels, ops.vessels_in_port],
    })
}
