//! Browser bindings for the demo page in `www/`. Each export takes plain
//! numbers and returns a JSON string the page renders.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use freightledger::finance::{installments_for, settlement_for};
use freightledger::logistics::{dwell_excess_fee, Milestone};
use freightledger::prediction::EvalResult;
use freightledger::sim::{compare_methods, run, Scenario};
use freightledger::{Cents, Rate};

const GOLDEN: &str = include_str!("../../../scenarios/golden.json");
const DWELL: &str = include_str!("../../../scenarios/dwell.json");

fn rate(x: f64, what: &str) -> Result<Rate, String> {
    Rate::from_f64(x).filter(|r| *r < Rate::ONE).ok_or_else(|| format!("{what} must be in [0, 1)"))
}

/// Fee for every dwell length from 0 to `max_days`.
#[wasm_bindgen]
pub fn fee_curve(limit_days: u32, base_cents: i64, increment_cents: i64, max_days: u32) -> String {
    let points: Vec<Value> = (0..=max_days.min(365))
        .map(|d| {
            let fee = dwell_excess_fee(d, limit_days, Cents(base_cents), Cents(increment_cents));
            json!({"days": d, "fee": fee.0, "label": fee.to_string()})
        })
        .collect();
    Value::Array(points).to_string()
}

/// The three payment methods on the reference shipment, with adjustable discounts.
#[wasm_bindgen]
pub fn compare_reference(discount: f64, classic_discount: f64) -> Result<String, String> {
    let mut s = Scenario::from_json(GOLDEN).map_err(|e| e.to_string())?;
    for p in &mut s.policies {
        p.discount_rate = rate(discount, "discount")?;
        p.classic_discount_rate = Some(rate(classic_discount, "classic discount")?);
    }
    let c = compare_methods(&s).map_err(|e| e.to_string())?;
    let mut v = serde_json::to_value(&c).map_err(|e| e.to_string())?;
    v["text"] = c.to_string().into();
    Ok(v.to_string())
}

/// Replay the dwell-fee shipment with a chosen gate and historical accuracy.
#[wasm_bindgen]
pub fn explore_gate(threshold: f64, registry_accuracy: f64) -> Result<String, String> {
    if !(0.0..=1.0).contains(&threshold) || !(0.0..=1.0).contains(&registry_accuracy) {
        return Err("threshold and accuracy must be in [0, 1]".into());
    }
    let mut s = Scenario::from_json(DWELL).map_err(|e| e.to_string())?;
    let code = "DWELL_EXCESS_FEE";
    for p in &mut s.policies {
        if let Some(rule) = p.charge_rules.get_mut(code) {
            rule.accuracy_threshold = threshold;
        }
    }
    let lane = s.lanes[0].lane_id.clone();
    let at = Milestone::VesselDeparture(s.lanes[0].origin().to_string());
    let samples = s.predictor.registry.lookup(&lane, &at, code).map_or(100, |e| e.sample_count);
    s.predictor.registry.update(&lane, &at, code, EvalResult { balanced_accuracy: registry_accuracy, sample_count: samples });

    let out = run(&s).map_err(|e| e.to_string())?;
    let shipment = s.shipment_ids().next().ok_or("no shipment")?;
    let installments = installments_for(&out.finance, shipment).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = installments
        .iter()
        .map(|r| {
            let milestone = out
                .invoices
                .iter()
                .find(|i| i.shipment_id == shipment && i.iteration == r.iteration)
                .map(|i| i.trigger_milestone.to_string());
            json!({
                "iteration": r.iteration,
                "milestone": milestone,
                "charge": r.charge_code,
                "basis": format!("{:?}", r.basis),
                "amount": r.paid_amount.to_string(),
                "hour": r.paid_at,
            })
        })
        .collect();
    let st = settlement_for(&out.finance, shipment).map_err(|e| e.to_string())?.ok_or("shipment did not settle")?;
    let total: Cents = installments.iter().map(|r| r.paid_amount).sum::<Cents>() + st.final_payment - st.surplus_carried;
    Ok(json!({
        "installments": rows,
        "final_payment": st.final_payment.to_string(),
        "surplus_carried": st.surplus_carried.to_string(),
        "carrier_total": total.to_string(),
        "finance_state": out.finance.state_hash().to_hex(),
    })
    .to_string())
}
