use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::flow;
use super::{day_of, MethodReport, Method, Party, Role, Scenario, ShipmentRef, SimError};
use crate::finance::{
    decide_charges, installments_for, payout, reward_ai_service, settle_final, CarrierAccount, FactoringPolicy,
    Outcome, PaidState, SettlementResult,
};
use crate::ledger::{from_canonical, Ledger, NetworkKeyring, PayloadKind};
use crate::logistics::{compute_invoice, EventStatus, Hours, MilestoneEvent, PartialInvoice, Timeline};
use crate::money::Cents;
use crate::prediction::{
    aggregate_estimate, extract_features, predict_dwell_bucket, AccuracyRegistry, PredictedValue, AI_SOURCE,
};
use crate::relay::{decode_message, encode_message, export_view, verify_and_import, ImportedPayload, RecordSelector, TrustAnchor};

/// A shipper's payment for a delivered shipment, to the carrier under open
/// account or to the bank that factored the invoice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipperPayment {
    pub shipment_id: String,
    pub shipper_id: String,
    pub payee: Party,
    pub amount: Cents,
    pub paid_at: Hours,
}

/// Everything a run leaves behind.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: MethodReport,
    pub logistics: Ledger,
    pub finance: Ledger,
    pub accounts: BTreeMap<String, CarrierAccount>,
    /// Every invoice iteration, in the order computed.
    pub invoices: Vec<PartialInvoice>,
    pub predictions: Vec<PredictedValue>,
    /// One human-readable line per step.
    pub trace: Vec<String>,
}

struct Runner<'a> {
    scenario: &'a Scenario,
    logistics_ring: NetworkKeyring,
    anchors: TrustAnchor,
    logistics: Ledger,
    finance: Ledger,
    timeline: Timeline,
    registry: AccuracyRegistry,
    accounts: BTreeMap<String, CarrierAccount>,
    iterations: BTreeMap<String, u32>,
    predictions: Vec<PredictedValue>,
    invoices: Vec<PartialInvoice>,
    flows: Vec<super::CashFlow>,
    trace: Vec<String>,
}

/// Replay the scenario's events under its payment method.
pub fn run(scenario: &Scenario) -> Result<SimOutcome, SimError> {
    scenario.validate()?;
    let logistics_ring = scenario.anchors.logistics.keyring()?;
    let finance_ring = scenario.anchors.finance.keyring()?;
    let mut anchors = TrustAnchor::new();
    anchors.trust(logistics_ring.identity());
    let mut r = Runner {
        scenario,
        logistics: Ledger::new(logistics_ring.identity().clone()),
        finance: Ledger::new(finance_ring.identity().clone()),
        logistics_ring,
        anchors,
        timeline: Timeline::new(),
        registry: AccuracyRegistry::new(),
        accounts: BTreeMap::new(),
        iterations: BTreeMap::new(),
        predictions: Vec::new(),
        invoices: Vec::new(),
        flows: Vec::new(),
        trace: Vec::new(),
    };
    r.setup()?;
    for e in &scenario.events {
        r.on_event(e)?;
    }
    let report = MethodReport::new(
        &scenario.meta.name,
        scenario.method,
        r.flows,
        r.logistics.state_hash(),
        r.finance.state_hash(),
    );
    Ok(SimOutcome {
        report,
        logistics: r.logistics,
        finance: r.finance,
        accounts: r.accounts,
        invoices: r.invoices,
        predictions: r.predictions,
        trace: r.trace,
    })
}

impl Runner<'_> {
    fn setup(&mut self) -> Result<(), SimError> {
        let s = self.scenario;
        for c in &s.contracts {
            self.logistics.append(PayloadKind::ServiceContract, &c.contract)?;
            if s.method == Method::OpenAccount || c.shipments.is_empty() {
                continue;
            }
            let Some(p) = s.policy_for(&c.contract.carrier_id, &c.contract.lane_id) else {
                return Err(SimError::Invalid(format!(
                    "{} needs a factoring policy for carrier {} on lane {}",
                    s.method, c.contract.carrier_id, c.contract.lane_id
                )));
            };
            if s.method == Method::ClassicFactoring && p.classic_discount_rate.is_none() {
                return Err(SimError::Invalid(format!("policy {} has no classic_discount_rate", p.policy_id)));
            }
        }
        if s.method == Method::OpenAccount {
            return Ok(());
        }
        for p in &s.policies {
            self.finance.append(PayloadKind::Policy, p)?;
        }
        if s.method == Method::AcceleratedFactoring && !s.predictor.registry.is_empty() {
            self.logistics.append(PayloadKind::AccuracyReport, &s.predictor.registry)?;
            let imported = self.relay(&RecordSelector::Latest(PayloadKind::AccuracyReport))?;
            self.registry = imported.decode()?;
            self.note(0, "-", format!("accuracy registry imported ({} entries)", self.registry.len()));
        }
        Ok(())
    }

    fn note(&mut self, hour: Hours, shipment: &str, text: String) {
        self.trace.push(format!("d{:<3} h{:<5} {:<8} {}", day_of(hour), hour, shipment, text));
    }

    /// Export the selected logistics record, pass it through the wire
    /// format, and import it on the finance ledger.
    fn relay(&mut self, selector: &RecordSelector) -> Result<ImportedPayload, SimError> {
        let attested = export_view(&self.logistics, &self.logistics_ring, selector)?;
        let received = decode_message(&encode_message(&attested))?;
        let record = verify_and_import(&mut self.finance, &received, &self.anchors)?;
        Ok(from_canonical(&record.payload_bytes)?)
    }

    fn on_event(&mut self, event: &MilestoneEvent) -> Result<(), SimError> {
        let rec = self.timeline.record_event(event.clone())?.clone();
        self.logistics.append(PayloadKind::MilestoneEvent, &rec)?;
        let sh = self.scenario.shipment(&rec.shipment_id).expect("validated");
        match rec.status {
            EventStatus::Actual => self.on_actual(sh, &rec),
            EventStatus::Estimated if rec.source != AI_SOURCE => self.publish_estimates(sh, &rec),
            _ => Ok(()),
        }
    }

    fn on_actual(&mut self, sh: ShipmentRef<'_>, rec: &MilestoneEvent) -> Result<(), SimError> {
        let sid = rec.shipment_id.as_str();
        let at = rec.emitted_at;
        let iteration = {
            let n = self.iterations.entry(sid.to_string()).or_insert(0);
            *n += 1;
            *n
        };
        self.note(at, sid, format!("{} actual at h{}", rec.milestone, rec.occurrence_time));

        self.predict(sh, rec)?;
        self.publish_estimates(sh, rec)?;

        let inv = compute_invoice(sh.contract, sh.lane, &self.timeline, sid, &self.predictions, iteration, &rec.milestone)?;
        self.logistics.append(PayloadKind::PartialInvoice, &inv)?;
        self.note(
            at,
            sid,
            format!(
                "invoice #{iteration}: actual {} + predicted {} = {}{}",
                inv.total_actual,
                inv.total_predicted,
                inv.total(),
                if inv.is_final { " (final)" } else { "" }
            ),
        );
        let is_final = inv.is_final;
        self.invoices.push(inv);

        match self.scenario.method {
            Method::AcceleratedFactoring => self.accelerated(sh, rec),
            Method::ClassicFactoring if is_final => self.classic(sh, rec),
            Method::OpenAccount if is_final => {
                let total = self.invoices.last().expect("just pushed").total_actual;
                let payee = Party::new(Role::Carrier, &sh.contract.carrier_id);
                self.shipper_pays(sh, payee, total, at + 24 * self.scenario.meta.open_account_days)
            }
            _ => Ok(()),
        }
    }

    /// Publish the scripted predictions for this milestone and run any
    /// dwell classifiers attached to it.
    fn predict(&mut self, sh: ShipmentRef<'_>, rec: &MilestoneEvent) -> Result<(), SimError> {
        let sid = rec.shipment_id.as_str();
        let mut fresh: Vec<PredictedValue> = self
            .scenario
            .predictor
            .predictions
            .iter()
            .filter(|p| p.shipment_id == sid && p.produced_at_milestone == rec.milestone)
            .cloned()
            .collect();
        let loaded = self.scenario.models.for_trigger(&sh.lane.lane_id, &rec.milestone);
        if !loaded.is_empty() {
            let seq = extract_features(&self.timeline, sh.lane, sid, &rec.milestone, &sh.spec.context)?;
            let rows: Vec<Vec<f64>> = seq.iter().map(|v| v.to_vec()).collect();
            for lm in loaded {
                let p = predict_dwell_bucket(&lm.models, &rows)?;
                self.trace.push(format!("{:>20} model {} at {}: {}", "", lm.charge_code, lm.port, p.explanation()));
                fresh.push(p.to_predicted_value(sid, &lm.port, Some(&lm.charge_code), rec.milestone.clone()));
            }
        }
        for p in &fresh {
            self.note(rec.emitted_at, sid, format!("prediction {:?} = {} (score {:.4})", p.target, p.value, p.score));
        }
        self.predictions.extend(fresh);
        Ok(())
    }

    /// Fuse outstanding third-party estimates for the remaining port events
    /// into one AI estimate each, when the fused value changed.
    fn publish_estimates(&mut self, sh: ShipmentRef<'_>, rec: &MilestoneEvent) -> Result<(), SimError> {
        let sid = rec.shipment_id.as_str();
        for m in sh.lane.port_events() {
            if self.timeline.actual(sid, &m).is_some() {
                continue;
            }
            let ests = self.timeline.by_source(sid, &m, EventStatus::Estimated);
            let pairs: Vec<(&str, f64)> = ests
                .iter()
                .filter(|e| e.source != AI_SOURCE)
                .map(|e| (e.source.as_str(), e.occurrence_time as f64))
                .collect();
            let Some(t) = aggregate_estimate(&pairs, &self.scenario.predictor.source_weights, None) else {
                continue;
            };
            let t = t.round() as Hours;
            let previous = ests.iter().find(|e| e.source == AI_SOURCE).map(|e| e.occurrence_time);
            if previous == Some(t) {
                continue;
            }
            let est = MilestoneEvent {
                shipment_id: sid.to_string(),
                milestone: m.clone(),
                status: EventStatus::Estimated,
                source: AI_SOURCE.to_string(),
                occurrence_time: t,
                emitted_at: rec.emitted_at,
                emission_seq: 0,
            };
            let est = self.timeline.record_event(est)?.clone();
            self.logistics.append(PayloadKind::MilestoneEvent, &est)?;
        }
        Ok(())
    }

    fn policy(&self, sh: ShipmentRef<'_>) -> &FactoringPolicy {
        self.scenario.policy_for(&sh.contract.carrier_id, &sh.lane.lane_id).expect("checked in setup")
    }

    fn accelerated(&mut self, sh: ShipmentRef<'_>, rec: &MilestoneEvent) -> Result<(), SimError> {
        let sid = rec.shipment_id.as_str();
        let at = rec.emitted_at;
        let policy = self.policy(sh).clone();
        let invoice: PartialInvoice =
            self.relay(&RecordSelector::LatestInvoice { shipment_id: sid.to_string() })?.decode()?;
        let paid = PaidState::from_installments(&installments_for(&self.finance, sid)?);
        let decisions = decide_charges(&invoice, &policy, &self.registry, &paid);
        for d in &decisions {
            if let Outcome::Deferred(why) = &d.outcome {
                self.note(at, sid, format!("{} {:?} deferred: {why}", d.line.charge_code, d.line.basis));
            }
        }
        let carrier = &sh.contract.carrier_id;
        let account = self.accounts.entry(carrier.clone()).or_insert_with(|| CarrierAccount::new(carrier));
        let paid_now = payout(&mut self.finance, account, &invoice, &decisions, at)?;
        let bank = Party::new(Role::Bank, &policy.bank_id);
        let carrier_party = Party::new(Role::Carrier, carrier);
        for p in paid_now {
            let memo = format!("installment {} ({:?}, iteration {})", p.charge_code, p.basis, p.iteration);
            self.note(at, sid, format!("{memo}: {} ({} from surplus)", p.paid_amount, p.surplus_applied));
            if p.cash().is_positive() {
                self.flows.push(flow(at, bank.clone(), carrier_party.clone(), p.cash(), sid, memo));
            }
        }
        if !invoice.is_final {
            return Ok(());
        }

        let settle_at = at + 24 * self.scenario.meta.settlement_days;
        let account = self.accounts.get_mut(carrier).expect("inserted above");
        let s = settle_final(&mut self.finance, &invoice, &policy, account, settle_at)?;
        self.note(
            settle_at,
            sid,
            format!(
                "settlement: entitlement {}, paid before {}, final {}, surplus carried {}",
                s.entitlement, s.total_paid_before_final, s.final_payment, s.surplus_carried
            ),
        );
        if s.cash().is_positive() {
            self.flows.push(flow(settle_at, bank.clone(), carrier_party.clone(), s.cash(), sid, "final settlement".into()));
        }
        if policy.ai_reward.is_positive() {
            reward_ai_service(&mut self.finance, sid, carrier, policy.ai_reward, settle_at)?;
            let ai = Party::new(Role::AiService, AI_SOURCE);
            self.flows.push(flow(settle_at, carrier_party, ai, policy.ai_reward, sid, "prediction reward".into()));
        }
        let repay_at = at + 24 * self.scenario.meta.open_account_days;
        self.shipper_pays(sh, bank, invoice.total_actual, repay_at)
    }

    fn classic(&mut self, sh: ShipmentRef<'_>, rec: &MilestoneEvent) -> Result<(), SimError> {
        let sid = rec.shipment_id.as_str();
        let policy = self.policy(sh).clone();
        let invoice: PartialInvoice =
            self.relay(&RecordSelector::LatestInvoice { shipment_id: sid.to_string() })?.decode()?;
        let rate = policy.classic_discount_rate.expect("checked in setup");
        let amount = invoice.total_actual.discounted(rate);
        let pay_at = rec.emitted_at + 24 * self.scenario.meta.classic_payout_days;
        let result = SettlementResult {
            shipment_id: sid.to_string(),
            carrier_id: invoice.carrier_id.clone(),
            entitlement: amount,
            total_paid_before_final: Cents::ZERO,
            final_payment: amount,
            surplus_applied: Cents::ZERO,
            surplus_carried: Cents::ZERO,
            settled_at: pay_at,
        };
        self.finance.append(PayloadKind::Settlement, &result)?;
        self.note(pay_at, sid, format!("classic factoring pays {amount} at {rate} discount"));
        let bank = Party::new(Role::Bank, &policy.bank_id);
        if amount.is_positive() {
            let carrier = Party::new(Role::Carrier, &invoice.carrier_id);
            self.flows.push(flow(pay_at, bank.clone(), carrier, amount, sid, "factored invoice".into()));
        }
        let repay_at = rec.emitted_at + 24 * self.scenario.meta.open_account_days;
        self.shipper_pays(sh, bank, invoice.total_actual, repay_at)
    }

    fn shipper_pays(&mut self, sh: ShipmentRef<'_>, payee: Party, amount: Cents, at: Hours) -> Result<(), SimError> {
        let sid = sh.spec.shipment_id.as_str();
        let shipper = Party::new(Role::Shipper, &sh.contract.shipper_id);
        let rec = ShipperPayment {
            shipment_id: sid.to_string(),
            shipper_id: sh.contract.shipper_id.clone(),
            payee: payee.clone(),
            amount,
            paid_at: at,
        };
        self.finance.append(PayloadKind::Repayment, &rec)?;
        self.note(at, sid, format!("shipper pays {amount} to {payee}"));
        if amount.is_positive() {
            self.flows.push(flow(at, shipper, payee, amount, sid, "invoice payment".into()));
        }
        Ok(())
    }
}
