use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::logistics::{dwell_time, EventStatus, Hours, Milestone, MilestoneEvent, Port, PortRole, ShippingLane, Timeline};
use crate::prediction::{extract_features, PortOps, ShipmentContext, VesselInfo};

/// One ocean leg between consecutive ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegProfile {
    pub planned_hours: Hours,
    /// Standard deviation of the actual minus planned leg time.
    pub delay_sd: f64,
}

/// Dwell behaviour at a transshipment port.
///
/// The true dwell is
/// `planned_dwell + congestion_weight·(vessels_in_port − median) + arrival_delay_weight·arrival_delay + noise`,
/// rounded to whole hours and at least one hour. `vessels_in_port` is drawn
/// uniformly from `congestion_range`, so the median is its midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortProfile {
    pub port: String,
    pub planned_dwell_hours: Hours,
    pub berths: f64,
    pub congestion_range: [f64; 2],
    pub congestion_weight: f64,
    pub arrival_delay_weight: f64,
    pub noise_sd: f64,
}

impl PortProfile {
    fn median(&self) -> f64 {
        (self.congestion_range[0] + self.congestion_range[1]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub lane: ShippingLane,
    pub shipments: usize,
    pub seed: u64,
    /// Hours between consecutive shipments' planned departures.
    pub spacing_hours: Hours,
    pub origin_delay_sd: f64,
    /// One per leg, in lane order.
    pub legs: Vec<LegProfile>,
    /// One per transshipment port.
    pub ports: Vec<PortProfile>,
    /// Noise on the carrier's arrival estimate issued at each departure.
    pub estimate_noise_sd: f64,
}

impl SyntheticSpec {
    /// Shanghai → Singapore → Rotterdam. Dwell at Singapore is driven by
    /// congestion and is over 24h about half the time.
    pub fn one_hop(shipments: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            lane: lane("SHA-SIN-RTM", &["CNSHA", "SGSIN", "NLRTM"]),
            shipments,
            seed,
            spacing_hours: 6,
            origin_delay_sd: 6.0,
            legs: vec![LegProfile { planned_hours: 120, delay_sd: 8.0 }, LegProfile { planned_hours: 480, delay_sd: 12.0 }],
            ports: vec![port("SGSIN", 2.0, 0.3, 6.0)],
            estimate_noise_sd: 4.0,
        }
    }

    /// Shanghai → Singapore → Colombo → Rotterdam. Colombo's dwell depends
    /// on Colombo congestion and on the arrival delay there, neither of
    /// which is visible when the vessel leaves Shanghai.
    pub fn two_hop(shipments: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            lane: lane("SHA-SIN-CMB-RTM", &["CNSHA", "SGSIN", "LKCMB", "NLRTM"]),
            shipments,
            seed,
            spacing_hours: 6,
            origin_delay_sd: 4.0,
            legs: vec![
                LegProfile { planned_hours: 120, delay_sd: 6.0 },
                LegProfile { planned_hours: 96, delay_sd: 12.0 },
                LegProfile { planned_hours: 400, delay_sd: 12.0 },
            ],
            ports: vec![port("SGSIN", 2.0, 0.3, 6.0), port("LKCMB", 1.5, 1.0, 6.0)],
            estimate_noise_sd: 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(format!("synthetic spec: {m}")));
        self.lane.validate()?;
        if self.legs.len() + 1 != self.lane.ports.len() {
            return bad(format!("{} legs for {} ports", self.legs.len(), self.lane.ports.len()));
        }
        if self.legs.iter().any(|l| l.planned_hours <= 0) {
            return bad("leg planned_hours must be positive".into());
        }
        if self.spacing_hours < 0 {
            return bad("spacing_hours must be non-negative".into());
        }
        let sd_ok = |x: f64| x.is_finite() && x >= 0.0;
        if !sd_ok(self.origin_delay_sd) || !sd_ok(self.estimate_noise_sd) || !self.legs.iter().all(|l| sd_ok(l.delay_sd)) {
            return bad("standard deviations must be finite and non-negative".into());
        }
        let ts: Vec<&str> = self.lane.transshipment_ports().collect();
        let given: Vec<&str> = self.ports.iter().map(|p| p.port.as_str()).collect();
        if ts != given {
            return bad(format!("port profiles {given:?} do not match transshipment ports {ts:?}"));
        }
        for p in &self.ports {
            let [lo, hi] = p.congestion_range;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("{}: congestion_range must be increasing", p.port));
            }
            if p.planned_dwell_hours < 1 || !sd_ok(p.noise_sd) || !p.congestion_weight.is_finite() || !p.arrival_delay_weight.is_finite() {
                return bad(format!("{}: invalid dwell parameters", p.port));
            }
        }
        Ok(())
    }
}

fn lane(id: &str, codes: &[&str]) -> ShippingLane {
    let last = codes.len() - 1;
    let ports = codes
        .iter()
        .enumerate()
        .map(|(i, c)| Port {
            port_code: c.to_string(),
            role: match i {
                0 => PortRole::Origin,
                i if i == last => PortRole::Destination,
                _ => PortRole::Transshipment,
            },
        })
        .collect();
    let dwell_limit_days = codes[..last].iter().map(|c| (c.to_string(), 1)).collect();
    ShippingLane { lane_id: id.to_string(), ports, dwell_limit_days }
}

fn port(code: &str, congestion_weight: f64, arrival_delay_weight: f64, noise_sd: f64) -> PortProfile {
    PortProfile {
        port: code.to_string(),
        planned_dwell_hours: 24,
        berths: 40.0,
        congestion_range: [10.0, 50.0],
        congestion_weight,
        arrival_delay_weight,
        noise_sd,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShipment {
    pub shipment_id: String,
    pub context: ShipmentContext,
    /// This shipment's emissions in emission order.
    pub events: Vec<MilestoneEvent>,
    /// True dwell per transshipment port, as planted.
    pub dwell_hours: BTreeMap<String, Hours>,
}

impl SyntheticShipment {
    pub fn timeline(&self) -> Result<Timeline, SimError> {
        let mut t = Timeline::new();
        for e in &self.events {
            t.record_event(e.clone())?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub shipments: Vec<SyntheticShipment>,
}

impl SyntheticData {
    /// All emissions of all shipments, ordered by emission time.
    pub fn events(&self) -> Vec<MilestoneEvent> {
        let mut all: Vec<MilestoneEvent> = self.shipments.iter().flat_map(|s| s.events.iter().cloned()).collect();
        all.sort_by_key(|e| e.emitted_at);
        all
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated sd")
}

/// Generate journeys with planted dwell behaviour. Same spec, same output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lane = &spec.lane;
    let n_ports = lane.ports.len();
    let code = |i: usize| lane.ports[i].port_code.clone();
    let profile = |i: usize| &spec.ports[i - 1];

    let mut shipments = Vec::with_capacity(spec.shipments);
    for k in 0..spec.shipments {
        let sid = format!("SYN{k:05}");
        let start = k as Hours * spec.spacing_hours;

        let mut context = ShipmentContext {
            vessel: VesselInfo {
                age_years: rng.random_range(2.0..25.0),
                length_m: rng.random_range(200.0..400.0),
                tonnage: rng.random_range(5e4..2e5),
                capacity_teu: rng.random_range(4e3..2e4),
            },
            ..Default::default()
        };
        let mut congestion = vec![0.0; n_ports];
        for (i, c) in congestion.iter_mut().enumerate().take(n_ports - 1).skip(1) {
            let p = profile(i);
            *c = rng.random_range(p.congestion_range[0]..p.congestion_range[1]).round();
            let expected = (*c + normal(3.0).sample(&mut rng)).round().max(0.0);
            context.port_ops.insert(code(i), PortOps { berths: p.berths, expected_vessels: expected, vessels_in_port: *c });
        }

        // plan
        let mut plan_arr = vec![0; n_ports];
        let mut plan_dep = vec![0; n_ports];
        plan_dep[0] = start + 24;
        for i in 1..n_ports {
            plan_arr[i] = plan_dep[i - 1] + spec.legs[i - 1].planned_hours;
            if i + 1 < n_ports {
                plan_dep[i] = plan_arr[i] + profile(i).planned_dwell_hours;
            }
        }

        // what actually happens
        let mut act_arr = vec![0; n_ports];
        let mut act_dep = vec![0; n_ports];
        let mut est_arr = vec![0; n_ports];
        let mut dwell_hours = BTreeMap::new();
        act_dep[0] = plan_dep[0] + (normal(spec.origin_delay_sd).sample(&mut rng).round() as Hours).max(-12);
        for i in 1..n_ports {
            let leg = &spec.legs[i - 1];
            let slip = normal(leg.delay_sd).sample(&mut rng).round() as Hours;
            act_arr[i] = act_dep[i - 1] + (leg.planned_hours + slip).max(1);
            let est_noise = normal(spec.estimate_noise_sd).sample(&mut rng).round() as Hours;
            est_arr[i] = act_arr[i] + est_noise;
            if i + 1 < n_ports {
                let p = profile(i);
                let delay = (act_arr[i] - plan_arr[i]) as f64;
                let dwell = p.planned_dwell_hours as f64
                    + p.congestion_weight * (congestion[i] - p.median())
                    + p.arrival_delay_weight * delay
                    + normal(p.noise_sd).sample(&mut rng);
                let dwell = (dwell.round() as Hours).max(1);
                dwell_hours.insert(code(i), dwell);
                act_dep[i] = act_arr[i] + dwell;
            }
        }
        let last = n_ports - 1;

        let ev = |m: Milestone, status, source: &str, at: Hours, emitted: Hours| MilestoneEvent {
            shipment_id: sid.clone(),
            milestone: m,
            status,
            source: source.to_string(),
            occurrence_time: at,
            emitted_at: emitted,
            emission_seq: 0,
        };
        let mut events = Vec::new();
        let plan_at = start;
        events.push(ev(Milestone::ContainerLoadedOnVessel, EventStatus::Planned, "carrier", plan_dep[0] - 12, plan_at));
        for i in 0..n_ports {
            if i > 0 {
                events.push(ev(Milestone::VesselArrival(code(i)), EventStatus::Planned, "carrier", plan_arr[i], plan_at));
            }
            if i < last {
                events.push(ev(Milestone::VesselDeparture(code(i)), EventStatus::Planned, "carrier", plan_dep[i], plan_at));
            }
        }
        events.push(ev(Milestone::ContainerDischarge, EventStatus::Planned, "carrier", plan_arr[last] + 12, plan_at));
        events.push(ev(Milestone::DeliveryComplete, EventStatus::Planned, "carrier", plan_arr[last] + 48, plan_at));

        let load = act_dep[0] - 12;
        events.push(ev(Milestone::ContainerLoadedOnVessel, EventStatus::Actual, "carrier", load, load));
        for i in 0..n_ports {
            if i > 0 {
                events.push(ev(Milestone::VesselArrival(code(i)), EventStatus::Actual, "carrier", act_arr[i], act_arr[i]));
            }
            if i < last {
                events.push(ev(Milestone::VesselDeparture(code(i)), EventStatus::Actual, "carrier", act_dep[i], act_dep[i]));
                let next = Milestone::VesselArrival(code(i + 1));
                events.push(ev(next, EventStatus::Estimated, "carrier", est_arr[i + 1], act_dep[i]));
            }
        }
        let discharge = act_arr[last] + 12;
        events.push(ev(Milestone::ContainerDischarge, EventStatus::Actual, "carrier", discharge, discharge));
        events.push(ev(Milestone::DeliveryComplete, EventStatus::Actual, "carrier", discharge + 36, discharge + 36));

        shipments.push(SyntheticShipment { shipment_id: sid, context, events, dwell_hours });
    }
    Ok(SyntheticData { spec: spec.clone(), shipments })
}

/// The transshipment port whose dwell a classifier at `milestone` would
/// normally predict: the port just arrived at, or the next one after a
/// departure.
pub fn default_target_port(lane: &ShippingLane, milestone: &Milestone) -> Option<String> {
    let idx = lane.port_index(milestone.port()?)?;
    let target = match milestone {
        Milestone::VesselDeparture(_) => idx + 1,
        _ => idx,
    };
    (target > 0 && target + 1 < lane.ports.len()).then(|| lane.ports[target].port_code.clone())
}

/// Labelled sequences for a `dwell at target_port > threshold_hours`
/// classifier that runs when `milestone` occurs. Labels come from the
/// actual arrival and departure events.
pub fn build_dataset(
    data: &SyntheticData,
    milestone: &Milestone,
    target_port: &str,
    threshold_hours: u32,
) -> Result<Vec<(Vec<Vec<f64>>, bool)>, SimError> {
    let lane = &data.spec.lane;
    if lane.dwell_limit(target_port).is_none() || target_port == lane.origin() {
        return Err(SimError::Invalid(format!("{target_port} is not a transshipment port of {}", lane.lane_id)));
    }
    let mut out = Vec::with_capacity(data.shipments.len());
    for s in &data.shipments {
        let t = s.timeline()?;
        let seq = extract_features(&t, lane, &s.shipment_id, milestone, &s.context)?;
        let dwell = dwell_time(&t, &s.shipment_id, target_port)?
            .filter(|d| d.status == Some(EventStatus::Actual))
            .ok_or_else(|| SimError::Invalid(format!("{}: no actual dwell at {target_port}", s.shipment_id)))?;
        out.push((seq.iter().map(|v| v.to_vec()).collect(), dwell.hours > Hours::from(threshold_hours)));
    }
    Ok(out)
}
