//! Seeded random scenarios on a two-transshipment lane, shipments run back
//! to back so each one settles before the next starts.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use freightledger::sim::Scenario;

pub const LANE: &str = "SHA-SIN-CMB-RTM";
pub const PORTS: [&str; 2] = ["SGSIN", "LKCMB"];

/// What the generator planted, for computing expectations independently.
#[derive(Debug, Clone)]
pub struct Planted {
    /// Accelerated discount in parts per million.
    pub discount_ppm: i64,
    pub base_freight: i64,
    pub reefer: Option<i64>,
    /// (port, limit days, base per day, increment per day)
    pub dwell_fees: Vec<(String, u32, i64, i64)>,
    /// Per shipment: actual dwell hours at each transshipment port.
    pub dwell_hours: Vec<[i64; 2]>,
}

impl Planted {
    pub fn shipment_ids(&self) -> Vec<String> {
        (0..self.dwell_hours.len()).map(|k| format!("SHP-{k:03}")).collect()
    }

    /// Dwell fee by direct day-by-day summation.
    pub fn fee_by_summation(days: u32, limit: u32, base: i64, inc: i64) -> i64 {
        (limit + 1..=days).map(|d| base + inc * i64::from(d - limit - 1)).sum()
    }

    pub fn actual_total(&self, k: usize) -> i64 {
        let mut total = self.base_freight + self.reefer.unwrap_or(0);
        for (port, limit, base, inc) in &self.dwell_fees {
            let i = PORTS.iter().position(|p| p == port).unwrap();
            let hours = self.dwell_hours[k][i];
            let days = ((hours + 23) / 24) as u32;
            total += Self::fee_by_summation(days, *limit, *base, *inc);
        }
        total
    }

    /// floor(total × (1 − discount)).
    pub fn entitlement(&self, k: usize) -> i64 {
        let t = i128::from(self.actual_total(k));
        (t * i128::from(1_000_000 - self.discount_ppm)).div_euclid(1_000_000) as i64
    }
}

fn ev(shipment: &str, milestone: &str, status: &str, source: &str, at: i64, emitted: i64) -> Value {
    json!({
        "shipment_id": shipment,
        "milestone": milestone,
        "status": status,
        "source": source,
        "occurrence_time": at,
        "emitted_at": emitted,
    })
}

/// A random accelerated-factoring scenario with 2 to 4 shipments.
pub fn random_scenario(seed: u64) -> (Scenario, Planted) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4usize);
    let discount_ppm = rng.random_range(0..=200i64) * 1_000;
    let base_freight = rng.random_range(2_000_000..=5_000_000i64);
    let reefer = rng.random_bool(0.5).then(|| rng.random_range(1_000..=50_000i64));
    let limits = [rng.random_range(0..=3u32), rng.random_range(0..=3u32)];

    let mut charges = vec![json!({
        "charge_code": "BASE_FREIGHT", "plan_kind": "Planned", "comp_kind": "Fixed",
        "rate_params": {"flat_amount": base_freight}
    })];
    if let Some(r) = reefer {
        charges.push(json!({
            "charge_code": "REEFER_PLUG", "plan_kind": "Planned", "comp_kind": "Fixed",
            "rate_params": {"flat_amount": r}
        }));
    }
    let mut dwell_fees = Vec::new();
    let mut rules = serde_json::Map::new();
    for (i, port) in PORTS.iter().enumerate() {
        if rng.random_bool(0.2) {
            continue;
        }
        let code = format!("DWELL_{port}");
        let base = rng.random_range(1_000..=20_000i64);
        let inc = rng.random_range(0..=20_000i64);
        charges.push(json!({
            "charge_code": code, "plan_kind": "Unplanned", "comp_kind": "Variable",
            "rate_params": {"base_per_day": base, "increment_per_day": inc},
            "trigger": format!("VesselArrival({port})")
        }));
        dwell_fees.push((port.to_string(), limits[i], base, inc));
        rules.insert(
            code,
            json!({
                "include_predicted": rng.random_bool(0.8),
                "accuracy_threshold": rng.random_range(50..=90) as f64 / 100.0,
                "predicted_fraction": rng.random_range(1..=4) as f64 / 4.0,
            }),
        );
    }

    // registry over every milestone a prediction can be made at
    let pred_points = ["VesselDeparture(CNSHA)", "VesselArrival(SGSIN)", "VesselDeparture(SGSIN)"];
    let mut entries = Vec::new();
    for (port, ..) in &dwell_fees {
        for m in pred_points {
            entries.push(json!({
                "lane_id": LANE, "milestone": m, "target": format!("DWELL_{port}"),
                "balanced_accuracy": rng.random_range(55..=95) as f64 / 100.0, "sample_count": 100
            }));
        }
    }

    let mut events = Vec::new();
    let mut predictions = Vec::new();
    let mut shipments = Vec::new();
    let mut dwell_hours = Vec::new();
    let mut t0 = 0i64;
    for k in 0..n {
        let id = format!("SHP-{k:03}");
        let dw = [rng.random_range(1..=144i64), rng.random_range(1..=144i64)];
        let loaded = t0 + 24;
        let dep_o = loaded + 12;
        let arr_1 = dep_o + rng.random_range(96..=168);
        let dep_1 = arr_1 + dw[0];
        let arr_2 = dep_1 + rng.random_range(48..=96);
        let dep_2 = arr_2 + dw[1];
        let arr_d = dep_2 + rng.random_range(300..=400);
        let discharge = arr_d + 24;
        let delivered = discharge + 24;
        let journey = [
            ("ContainerLoadedOnVessel", loaded),
            ("VesselDeparture(CNSHA)", dep_o),
            ("VesselArrival(SGSIN)", arr_1),
            ("VesselDeparture(SGSIN)", dep_1),
            ("VesselArrival(LKCMB)", arr_2),
            ("VesselDeparture(LKCMB)", dep_2),
            ("VesselArrival(NLRTM)", arr_d),
            ("ContainerDischarge", discharge),
            ("DeliveryComplete", delivered),
        ];
        for (m, at) in journey {
            events.push(ev(&id, m, "Planned", "carrier", at, t0));
        }
        for (m, at) in journey {
            events.push(ev(&id, m, "Actual", "carrier", at, at));
        }
        for (port, ..) in &dwell_fees {
            if rng.random_bool(0.25) {
                continue;
            }
            let at = if port == "SGSIN" { pred_points[0] } else { pred_points[rng.random_range(0..3)] };
            predictions.push(json!({
                "shipment_id": id,
                "target": {"DwellDays": {"port": port}},
                "value": rng.random_range(0..=6) as f64,
                "score": rng.random_range(50..=99) as f64 / 100.0,
                "charge_code": format!("DWELL_{port}"),
                "produced_at_milestone": at,
            }));
        }
        shipments.push(json!({"shipment_id": id}));
        dwell_hours.push(dw);
        t0 = delivered + 48;
    }
    events.sort_by_key(|e| e["emitted_at"].as_i64().unwrap());

    let excluded: Vec<&str> = reefer.iter().map(|_| "REEFER_PLUG").collect();
    let scenario = json!({
        "meta": {"name": format!("random-{seed}"), "epoch": "2024-01-01", "seed": seed},
        "lanes": [{
            "lane_id": LANE,
            "ports": [
                {"port_code": "CNSHA", "role": "Origin"},
                {"port_code": "SGSIN", "role": "Transshipment"},
                {"port_code": "LKCMB", "role": "Transshipment"},
                {"port_code": "NLRTM", "role": "Destination"}
            ],
            "dwell_limit_days": {"CNSHA": 1, "SGSIN": limits[0], "LKCMB": limits[1]}
        }],
        "contracts": [{
            "contract": {
                "contract_id": "SC-RANDOM", "shipper_id": "shipper", "carrier_id": "carrier",
                "lane_id": LANE, "currency": "USD", "charges": charges
            },
            "shipments": shipments
        }],
        "policies": [{
            "policy_id": "POL-RANDOM", "bank_id": "bank", "carrier_id": "carrier", "lane_id": LANE,
            "discount_rate": discount_ppm as f64 / 1e6,
            "charge_rules": rules,
            "excluded_charges": excluded,
        }],
        "anchors": {
            "logistics": {"network_id": "trade-logistics", "members": ["carrier", "shipper", "port-authority"], "quorum_threshold": 2},
            "finance": {"network_id": "trade-finance", "members": ["bank", "carrier", "shipper"], "quorum_threshold": 2}
        },
        "events": events,
        "predictor": {"registry": {"entries": entries}, "predictions": predictions},
        "method": "AcceleratedFactoring"
    });
    let s = Scenario::from_json(&scenario.to_string()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    (s, Planted { discount_ppm, base_freight, reefer, dwell_fees, dwell_hours })
}

/// Run one random scenario and check every shipment's books close exactly,
/// with any overpayment recovered in full on the shipment after it.
pub fn check_conservation(seed: u64) -> Result<(), String> {
    use freightledger::finance::{installments_for, settlement_for};
    use freightledger::sim::run;

    let (s, planted) = random_scenario(seed);
    let out = run(&s).map_err(|e| format!("seed {seed}: {e}"))?;
    let ids = planted.shipment_ids();
    let mut carried_in = 0i64;
    for (k, id) in ids.iter().enumerate() {
        let inst = installments_for(&out.finance, id).map_err(|e| e.to_string())?;
        let st = settlement_for(&out.finance, id)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("seed {seed}: {id} never settled"))?;
        let paid: i64 = inst.iter().map(|r| r.paid_amount.0).sum();
        let expected = planted.entitlement(k);
        let lhs = paid + st.final_payment.0 - st.surplus_carried.0;
        if lhs != expected {
            return Err(format!("seed {seed} {id}: paid {paid} + final {} - surplus {} = {lhs}, expected {expected}",
                st.final_payment.0, st.surplus_carried.0));
        }
        let applied: i64 = inst.iter().map(|r| r.surplus_applied.0).sum::<i64>() + st.surplus_applied.0;
        if applied != carried_in {
            return Err(format!("seed {seed} {id}: netted {applied} of {carried_in} carried from the previous shipment"));
        }
        carried_in = st.surplus_carried.0;
    }
    let left = out.accounts["carrier"].surplus_balance.0;
    if left != carried_in {
        return Err(format!("seed {seed}: account holds {left}, last shipment carried {carried_in}"));
    }
    Ok(())
}
