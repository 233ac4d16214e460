use std::fmt;

use serde::{Deserialize, Serialize};

use super::charges::{dwell_days, dwell_excess_fee, BASE_PER_DAY, FLAT_AMOUNT, INCREMENT_PER_DAY};
use super::{ChargeDefinition, CompKind, LogisticsError, Milestone, PlanKind, ServiceContract, ShippingLane, Timeline};
use crate::money::Cents;
use crate::prediction::{PredictedValue, PredictionTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Actual,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeLine {
    pub charge_code: String,
    pub amount: Cents,
    pub basis: Basis,
    /// 1.0 for actuals; the prediction's score otherwise.
    pub confidence: f64,
    pub explanation: String,
}

impl ChargeLine {
    fn actual(code: &str, amount: Cents, explanation: String) -> Self {
        ChargeLine { charge_code: code.to_string(), amount, basis: Basis::Actual, confidence: 1.0, explanation }
    }
}

/// One iteration of a shipment's carrier invoice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialInvoice {
    pub invoice_id: String,
    pub shipment_id: String,
    pub contract_id: String,
    pub carrier_id: String,
    pub lane_id: String,
    pub currency: String,
    pub iteration: u32,
    pub trigger_milestone: Milestone,
    pub lines: Vec<ChargeLine>,
    pub total_actual: Cents,
    pub total_predicted: Cents,
    #[serde(rename = "final")]
    pub is_final: bool,
}

impl PartialInvoice {
    pub fn line(&self, code: &str) -> Option<&ChargeLine> {
        self.lines.iter().find(|l| l.charge_code == code)
    }

    pub fn total(&self) -> Cents {
        self.total_actual + self.total_predicted
    }

    /// Totals agree with the lines, and a final invoice holds only actuals.
    pub fn check_invariants(&self) -> bool {
        let sum = |b| self.lines.iter().filter(|l| l.basis == b).map(|l| l.amount).sum::<Cents>();
        sum(Basis::Actual) == self.total_actual
            && sum(Basis::Predicted) == self.total_predicted
            && self.lines.iter().all(|l| l.amount.0 >= 0)
            && self.lines.iter().all(|l| l.basis == Basis::Predicted || l.confidence == 1.0)
            && (!self.is_final || self.lines.iter().all(|l| l.basis == Basis::Actual))
    }
}

impl fmt::Display for PartialInvoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Invoice {} (shipment {}, iteration {}, after {}){}",
            self.invoice_id,
            self.shipment_id,
            self.iteration,
            self.trigger_milestone,
            if self.is_final { " FINAL" } else { "" }
        )?;
        writeln!(f, "  {:<22} {:>14}  {:<9} {:>5}  explanation", "charge", "amount", "basis", "conf")?;
        for l in &self.lines {
            writeln!(
                f,
                "  {:<22} {:>14}  {:<9} {:>5.2}  {}",
                l.charge_code,
                l.amount.to_string(),
                format!("{:?}", l.basis),
                l.confidence,
                l.explanation
            )?;
        }
        writeln!(f, "  {:<22} {:>14}", "total actual", self.total_actual.to_string())?;
        writeln!(f, "  {:<22} {:>14}", "total predicted", self.total_predicted.to_string())?;
        write!(f, "  {:<22} {:>14} {}", "total", self.total().to_string(), self.currency)
    }
}

/// Recompute a shipment's invoice from the events recorded so far plus the
/// AI service's predictions.
///
/// Planned-fixed charges are actual from the first iteration. Other charges
/// become actual once their events have actually happened, predicted while a
/// prediction covers them, and are left off the invoice otherwise. At
/// `DeliveryComplete` every charge must resolve to an actual value.
#[allow(clippy::too_many_arguments)]
pub fn compute_invoice(
    contract: &ServiceContract,
    lane: &ShippingLane,
    timeline: &Timeline,
    shipment_id: &str,
    predictions: &[PredictedValue],
    iteration: u32,
    trigger_milestone: &Milestone,
) -> Result<PartialInvoice, LogisticsError> {
    if !timeline.has_shipment(shipment_id) {
        return Err(LogisticsError::UnknownShipment(shipment_id.to_string()));
    }
    let mine: Vec<&PredictedValue> = predictions.iter().filter(|p| p.shipment_id == shipment_id).collect();
    for p in &mine {
        if let Some(code) = &p.charge_code {
            if contract.charge(code).is_none() {
                return Err(LogisticsError::UnknownCharge(code.clone()));
            }
        }
    }
    let is_final = *trigger_milestone == Milestone::DeliveryComplete;
    let covering = |code: &str| mine.iter().rev().find(|p| p.charge_code.as_deref() == Some(code)).copied();

    let mut lines = Vec::new();
    for charge in &contract.charges {
        let line = match charge.comp_kind {
            CompKind::Fixed => fixed_line(charge, timeline, shipment_id, is_final, covering(&charge.charge_code)),
            CompKind::Variable => {
                dwell_line(charge, lane, timeline, shipment_id, is_final, covering(&charge.charge_code))?
            }
        };
        lines.extend(line);
    }

    let total_of = |b| lines.iter().filter(|l: &&ChargeLine| l.basis == b).map(|l| l.amount).sum::<Cents>();
    let total_actual = total_of(Basis::Actual);
    let total_predicted = total_of(Basis::Predicted);
    Ok(PartialInvoice {
        invoice_id: format!("{}-{}", contract.contract_id, shipment_id),
        shipment_id: shipment_id.to_string(),
        contract_id: contract.contract_id.clone(),
        carrier_id: contract.carrier_id.clone(),
        lane_id: lane.lane_id.clone(),
        currency: contract.currency.clone(),
        iteration,
        trigger_milestone: trigger_milestone.clone(),
        lines,
        total_actual,
        total_predicted,
        is_final,
    })
}

fn fixed_line(
    charge: &ChargeDefinition,
    timeline: &Timeline,
    shipment_id: &str,
    is_final: bool,
    prediction: Option<&PredictedValue>,
) -> Option<ChargeLine> {
    let code = &charge.charge_code;
    let flat = charge.param(FLAT_AMOUNT).unwrap_or(Cents::ZERO);
    if charge.plan_kind == PlanKind::Planned {
        return Some(ChargeLine::actual(code, flat, "contract rate".into()));
    }
    let trigger = charge.trigger.as_ref()?;
    if timeline.actual(shipment_id, trigger).is_some() {
        return Some(ChargeLine::actual(code, flat, format!("{trigger} occurred")));
    }
    if is_final {
        return Some(ChargeLine::actual(code, Cents::ZERO, format!("{trigger} did not occur")));
    }
    let p = prediction?;
    let applies = p.value >= 0.5;
    Some(ChargeLine {
        charge_code: code.clone(),
        amount: if applies { flat } else { Cents::ZERO },
        basis: Basis::Predicted,
        confidence: p.score,
        explanation: format!("{trigger} predicted {}", if applies { "to occur" } else { "not to occur" }),
    })
}

fn dwell_line(
    charge: &ChargeDefinition,
    lane: &ShippingLane,
    timeline: &Timeline,
    shipment_id: &str,
    is_final: bool,
    prediction: Option<&PredictedValue>,
) -> Result<Option<ChargeLine>, LogisticsError> {
    let code = &charge.charge_code;
    let port = charge.dwell_port().ok_or_else(|| LogisticsError::InvalidCharge {
        charge_code: code.clone(),
        reason: "variable charge without a port".into(),
    })?;
    let limit = lane.dwell_limit(port).unwrap_or(0);
    let base = charge.param(BASE_PER_DAY).unwrap_or(Cents::ZERO);
    let inc = charge.param(INCREMENT_PER_DAY).unwrap_or(Cents::ZERO);

    let arr = timeline.actual(shipment_id, &Milestone::VesselArrival(port.to_string()));
    let dep = timeline.actual(shipment_id, &Milestone::VesselDeparture(port.to_string()));
    if let (Some(a), Some(d)) = (arr, dep) {
        let hours = d.occurrence_time - a.occurrence_time;
        if hours < 0 {
            return Err(LogisticsError::NegativeDwell {
                shipment_id: shipment_id.to_string(),
                port: port.to_string(),
                arrival: a.occurrence_time,
                departure: d.occurrence_time,
            });
        }
        let days = dwell_days(hours);
        return Ok(Some(ChargeLine::actual(
            code,
            dwell_excess_fee(days, limit, base, inc),
            format!("dwell {days}d ({hours}h) vs limit {limit}d at {port}"),
        )));
    }
    if is_final {
        return Err(LogisticsError::MissingActual { charge_code: code.clone(), port: port.to_string() });
    }
    let Some(p) = prediction else {
        return Ok(None);
    };
    let days = match &p.target {
        PredictionTarget::DwellDays { .. } => p.value.round().max(0.0) as u32,
        // a single class bit bounds the dwell from below
        PredictionTarget::DwellClass { threshold_hours, .. } => {
            let whole = threshold_hours / 24;
            if p.value >= 0.5 {
                whole + 1
            } else {
                whole
            }
        }
        other => {
            return Err(LogisticsError::UnusablePrediction { charge_code: code.clone(), target: format!("{other:?}") })
        }
    };
    Ok(Some(ChargeLine {
        charge_code: code.clone(),
        amount: dwell_excess_fee(days, limit, base, inc),
        basis: Basis::Predicted,
        confidence: p.score,
        explanation: format!("predicted dwell {days}d vs limit {limit}d at {port}"),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistics::{EventStatus, MilestoneEvent};

    fn lane() -> ShippingLane {
        serde_json::from_str(
            r#"{"lane_id":"SHA-SIN-RTM",
                "ports":[{"port_code":"CNSHA","role":"Origin"},
                         {"port_code":"SGSIN","role":"Transshipment"},
                         {"port_code":"NLRTM","role":"Destination"}],
                "dwell_limit_days":{"CNSHA":1,"SGSIN":1}}"#,
        )
        .unwrap()
    }

    fn contract() -> ServiceContract {
        serde_json::from_str(
            r#"{"contract_id":"SC-1","shipper_id":"shipper","carrier_id":"carrier","lane_id":"SHA-SIN-RTM","currency":"USD",
                "charges":[
                  {"charge_code":"BASE_FREIGHT","plan_kind":"Planned","comp_kind":"Fixed","rate_params":{"flat_amount":900000}},
                  {"charge_code":"DWELL_EXCESS_FEE","plan_kind":"Unplanned","comp_kind":"Variable",
                   "rate_params":{"base_per_day":10000,"increment_per_day":10000},"trigger":"VesselArrival(SGSIN)"}]}"#,
        )
        .unwrap()
    }

    fn actual(m: &str, at: i64) -> MilestoneEvent {
        MilestoneEvent {
            shipment_id: "S1".into(),
            milestone: m.parse().unwrap(),
            status: EventStatus::Actual,
            source: "carrier".into(),
            occurrence_time: at,
            emitted_at: at,
            emission_seq: 0,
        }
    }

    fn dwell_prediction(days: f64, score: f64) -> PredictedValue {
        PredictedValue {
            shipment_id: "S1".into(),
            target: PredictionTarget::DwellDays { port: "SGSIN".into() },
            value: days,
            score,
            charge_code: Some("DWELL_EXCESS_FEE".into()),
            produced_at_milestone: "VesselDeparture(CNSHA)".parse().unwrap(),
        }
    }

    #[test]
    fn first_iteration_only_planned_fixed() {
        assert!(contract().validate(&lane()).is_ok());
        let mut t = Timeline::new();
        t.record_event(actual("ContainerLoadedOnVessel", 96)).unwrap();
        let inv =
            compute_invoice(&contract(), &lane(), &t, "S1", &[], 1, &Milestone::ContainerLoadedOnVessel).unwrap();
        assert_eq!(inv.lines.len(), 1);
        let l = &inv.lines[0];
        assert_eq!((l.charge_code.as_str(), l.amount, l.basis), ("BASE_FREIGHT", Cents::from_dollars(9_000), Basis::Actual));
        assert!(inv.check_invariants());
    }

    #[test]
    fn prediction_adds_predicted_dwell_fee() {
        let mut t = Timeline::new();
        t.record_event(actual("ContainerLoadedOnVessel", 96)).unwrap();
        t.record_event(actual("VesselDeparture(CNSHA)", 120)).unwrap();
        let trig: Milestone = "VesselDeparture(CNSHA)".parse().unwrap();
        let inv = compute_invoice(&contract(), &lane(), &t, "S1", &[dwell_prediction(2.0, 0.70)], 2, &trig).unwrap();
        let l = inv.line("DWELL_EXCESS_FEE").unwrap();
        assert_eq!((l.amount, l.basis, l.confidence), (Cents::from_dollars(100), Basis::Predicted, 0.70));
        assert_eq!(inv.total_predicted, Cents::from_dollars(100));
        assert!(inv.check_invariants());
    }

    #[test]
    fn final_iteration_uses_actual_dwell() {
        let mut t = Timeline::new();
        for (m, at) in [
            ("ContainerLoadedOnVessel", 96),
            ("VesselDeparture(CNSHA)", 120),
            ("VesselArrival(SGSIN)", 336),
            ("VesselDeparture(SGSIN)", 408),
            ("VesselArrival(NLRTM)", 672),
            ("ContainerDischarge", 696),
            ("DeliveryComplete", 720),
        ] {
            t.record_event(actual(m, at)).unwrap();
        }
        let inv = compute_invoice(&contract(), &lane(), &t, "S1", &[dwell_prediction(2.0, 0.7)], 7, &Milestone::DeliveryComplete)
            .unwrap();
        assert!(inv.is_final);
        let l = inv.line("DWELL_EXCESS_FEE").unwrap();
        // 72h → 3 days, limit 1 → $100 + $200
        assert_eq!((l.amount, l.basis), (Cents::from_dollars(300), Basis::Actual));
        assert_eq!(inv.total_actual, Cents::from_dollars(9_300));
        assert_eq!(inv.total_predicted, Cents::ZERO);
        assert!(inv.check_invariants());
    }

    #[test]
    fn final_without_dwell_events_is_an_error() {
        let mut t = Timeline::new();
        t.record_event(actual("DeliveryComplete", 720)).unwrap();
        let err = compute_invoice(&contract(), &lane(), &t, "S1", &[], 2, &Milestone::DeliveryComplete).unwrap_err();
        assert!(matches!(err, LogisticsError::MissingActual { .. }));
    }

    #[test]
    fn unknown_charge_in_prediction_rejected() {
        let mut t = Timeline::new();
        t.record_event(actual("ContainerLoadedOnVessel", 96)).unwrap();
        let mut p = dwell_prediction(2.0, 0.7);
        p.charge_code = Some("PORT_SURCHARGE".into());
        let err = compute_invoice(&contract(), &lane(), &t, "S1", &[p], 1, &Milestone::ContainerLoadedOnVessel).unwrap_err();
        assert_eq!(err, LogisticsError::UnknownCharge("PORT_SURCHARGE".into()));
    }

    #[test]
    fn unknown_shipment_rejected() {
        let t = Timeline::new();
        assert!(compute_invoice(&contract(), &lane(), &t, "S1", &[], 1, &Milestone::ContainerLoadedOnVessel).is_err());
    }

    #[test]
    fn actual_lines_never_demoted() {
        let mut t = Timeline::new();
        let steps = [
            ("ContainerLoadedOnVessel", 96),
            ("VesselDeparture(CNSHA)", 120),
            ("VesselArrival(SGSIN)", 336),
            ("VesselDeparture(SGSIN)", 400),
            ("VesselArrival(NLRTM)", 672),
        ];
        let mut seen: Vec<(String, Cents)> = Vec::new();
        for (k, (m, at)) in steps.iter().enumerate() {
            t.record_event(actual(m, *at)).unwrap();
            let trig: Milestone = m.parse().unwrap();
            let inv =
                compute_invoice(&contract(), &lane(), &t, "S1", &[dwell_prediction(4.0, 0.6)], k as u32 + 1, &trig).unwrap();
            for (code, amount) in &seen {
                let l = inv.line(code).unwrap();
                assert_eq!((l.basis, l.amount), (Basis::Actual, *amount));
            }
            seen = inv.lines.iter().filter(|l| l.basis == Basis::Actual).map(|l| (l.charge_code.clone(), l.amount)).collect();
            assert!(inv.check_invariants());
        }
        // 64h dwell → 3 days → $300 actual replaced the $600 prediction
        assert!(seen.contains(&("DWELL_EXCESS_FEE".into(), Cents::from_dollars(300))));
    }
}
