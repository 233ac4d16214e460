//! The trade-finance side: factoring policies, the accuracy-gated decision
//! of which invoice lines to pay now, discounted installment payouts, and
//! final settlement with surplus carry-forward.
//!
//! Every amount is integer cents and every rounding is a floor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Ledger, LedgerError, LedgerRecord, PayloadKind};
use crate::logistics::{Basis, ChargeLine, Hours, PartialInvoice};
use crate::money::{Cents, Rate};
use crate::prediction::AccuracyRegistry;

/// How the bank treats predicted amounts for one charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeRule {
    pub include_predicted: bool,
    /// Minimum historical balanced accuracy for the (lane, milestone, charge).
    pub accuracy_threshold: f64,
    /// Share of the predicted amount advanced before it is actual.
    pub predicted_fraction: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactoringPolicy {
    pub policy_id: String,
    pub bank_id: String,
    pub carrier_id: String,
    pub lane_id: String,
    /// Discount on accelerated payouts.
    pub discount_rate: Rate,
    /// Discount the same bank charges for one-shot factoring after delivery.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classic_discount_rate: Option<Rate>,
    #[serde(default)]
    pub charge_rules: BTreeMap<String, ChargeRule>,
    /// Charges the bank will not advance on; they are paid at settlement.
    #[serde(default)]
    pub excluded_charges: BTreeSet<String>,
    /// Carrier's payment to the AI service once a shipment settles.
    #[serde(default)]
    pub ai_reward: Cents,
}

impl FactoringPolicy {
    pub fn validate(&self) -> Result<(), FinanceError> {
        let bad = |why: String| Err(FinanceError::InvalidPolicy { policy_id: self.policy_id.clone(), reason: why });
        if self.discount_rate >= Rate::ONE {
            return bad("discount_rate must be below 1".into());
        }
        if self.classic_discount_rate.is_some_and(|r| r >= Rate::ONE) {
            return bad("classic_discount_rate must be below 1".into());
        }
        for (code, rule) in &self.charge_rules {
            if !(0.0..=1.0).contains(&rule.accuracy_threshold) {
                return bad(format!("{code}: accuracy_threshold outside [0, 1]"));
            }
            if rule.predicted_fraction == Rate::ZERO {
                return bad(format!("{code}: predicted_fraction must be positive"));
            }
            if self.excluded_charges.contains(code) {
                return bad(format!("{code} is both excluded and ruled"));
            }
        }
        if self.ai_reward.0 < 0 {
            return bad("ai_reward must be non-negative".into());
        }
        Ok(())
    }

    /// Carrier's share of `amount` after the accelerated discount.
    pub fn discounted(&self, amount: Cents) -> Cents {
        amount.discounted(self.discount_rate)
    }
}

/// One chunk paid to the carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstallmentRecord {
    pub shipment_id: String,
    pub carrier_id: String,
    pub iteration: u32,
    pub charge_code: String,
    pub basis: Basis,
    /// Invoice line amount the chunk was computed from.
    pub gross_amount: Cents,
    /// Amount credited against the shipment's entitlement.
    pub paid_amount: Cents,
    /// Part of `paid_amount` covered by the carrier's surplus rather than cash.
    pub surplus_applied: Cents,
    pub paid_at: Hours,
}

impl InstallmentRecord {
    pub fn cash(&self) -> Cents {
        self.paid_amount - self.surplus_applied
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettlementResult {
    pub shipment_id: String,
    pub carrier_id: String,
    pub entitlement: Cents,
    pub total_paid_before_final: Cents,
    pub final_payment: Cents,
    /// Part of `final_payment` covered by earlier surplus.
    pub surplus_applied: Cents,
    pub surplus_carried: Cents,
    pub settled_at: Hours,
}

impl SettlementResult {
    pub fn cash(&self) -> Cents {
        self.final_payment - self.surplus_applied
    }
}

/// Bank-side running position with one carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarrierAccount {
    pub carrier_id: String,
    pub surplus_balance: Cents,
    pub history: Vec<SettlementResult>,
}

impl CarrierAccount {
    pub fn new(carrier_id: &str) -> Self {
        CarrierAccount { carrier_id: carrier_id.to_string(), surplus_balance: Cents::ZERO, history: Vec::new() }
    }

    /// Cover as much of `amount` as the surplus allows; returns the part covered.
    fn draw_surplus(&mut self, amount: Cents) -> Cents {
        let used = self.surplus_balance.min(amount).max(Cents::ZERO);
        self.surplus_balance -= used;
        used
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub shipment_id: String,
    pub carrier_id: String,
    pub amount: Cents,
    pub paid_at: Hours,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FinanceError {
    #[error("policy {policy_id}: {reason}")]
    InvalidPolicy { policy_id: String, reason: String },
    #[error("invoice {0} is not final")]
    NotFinal(String),
    #[error("shipment {0} is already settled")]
    AlreadySettled(String),
    #[error("shipment {0} is not settled yet")]
    NotSettled(String),
    #[error("invoice for carrier {invoice} settled against account of {account}")]
    CarrierMismatch { invoice: String, account: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// What has already been credited for one charge of one shipment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChargePaid {
    pub predicted: Cents,
    pub actual: Option<Cents>,
}

/// Per-charge payment history for one shipment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PaidState(pub BTreeMap<String, ChargePaid>);

impl PaidState {
    pub fn from_installments<'a, I: IntoIterator<Item = &'a InstallmentRecord>>(items: I) -> Self {
        let mut s = PaidState::default();
        for r in items {
            let e = s.0.entry(r.charge_code.clone()).or_default();
            match r.basis {
                Basis::Predicted => e.predicted += r.paid_amount,
                Basis::Actual => *e.actual.get_or_insert(Cents::ZERO) += r.paid_amount,
            }
        }
        s
    }

    pub fn get(&self, code: &str) -> ChargePaid {
        self.0.get(code).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeferReason {
    Excluded,
    AlreadyPaid,
    NoRule,
    PredictedNotIncluded,
    NoAccuracyRecord,
    BelowThreshold { accuracy: f64, threshold: f64 },
}

impl fmt::Display for DeferReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeferReason::Excluded => f.write_str("excluded by policy, paid at settlement"),
            DeferReason::AlreadyPaid => f.write_str("already paid on this basis"),
            DeferReason::NoRule => f.write_str("no rule for predicted amounts of this charge"),
            DeferReason::PredictedNotIncluded => f.write_str("policy does not advance predicted amounts"),
            DeferReason::NoAccuracyRecord => f.write_str("no accuracy record for this lane and milestone"),
            DeferReason::BelowThreshold { accuracy, threshold } => {
                write!(f, "accuracy {accuracy:.4} below threshold {threshold:.4}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pay,
    Deferred(DeferReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub line: ChargeLine,
    pub payable: Cents,
    pub outcome: Outcome,
}

/// Decide what to pay against one imported invoice iteration. Pure.
///
/// Actual lines are paid in full (discounted) minus whatever was advanced on
/// a prediction for the same charge. Predicted lines are advanced at most
/// once per charge, and only when the policy includes them and the
/// registry's accuracy for this lane and milestone clears the threshold.
pub fn decide_charges(
    invoice: &PartialInvoice,
    policy: &FactoringPolicy,
    registry: &AccuracyRegistry,
    paid: &PaidState,
) -> Vec<Decision> {
    invoice
        .lines
        .iter()
        .map(|line| {
            let (payable, outcome) = decide_line(invoice, line, policy, registry, paid.get(&line.charge_code));
            Decision { line: line.clone(), payable, outcome }
        })
        .collect()
}

fn decide_line(
    invoice: &PartialInvoice,
    line: &ChargeLine,
    policy: &FactoringPolicy,
    registry: &AccuracyRegistry,
    paid: ChargePaid,
) -> (Cents, Outcome) {
    let defer = |r| (Cents::ZERO, Outcome::Deferred(r));
    if policy.excluded_charges.contains(&line.charge_code) {
        return defer(DeferReason::Excluded);
    }
    match line.basis {
        Basis::Actual => {
            if paid.actual.is_some() {
                return defer(DeferReason::AlreadyPaid);
            }
            let due = (policy.discounted(line.amount) - paid.predicted).max(Cents::ZERO);
            (due, Outcome::Pay)
        }
        Basis::Predicted => {
            if paid.predicted.is_positive() || paid.actual.is_some() {
                return defer(DeferReason::AlreadyPaid);
            }
            let Some(rule) = policy.charge_rules.get(&line.charge_code) else {
                return defer(DeferReason::NoRule);
            };
            if !rule.include_predicted {
                return defer(DeferReason::PredictedNotIncluded);
            }
            let Some(entry) = registry.lookup(&invoice.lane_id, &invoice.trigger_milestone, &line.charge_code) else {
                return defer(DeferReason::NoAccuracyRecord);
            };
            if entry.balanced_accuracy < rule.accuracy_threshold {
                return defer(DeferReason::BelowThreshold {
                    accuracy: entry.balanced_accuracy,
                    threshold: rule.accuracy_threshold,
                });
            }
            let due = line.amount.scale2_floor(rule.predicted_fraction, policy.discount_rate.complement());
            (due, Outcome::Pay)
        }
    }
}

/// Append one installment per positive decision. Any surplus the carrier
/// holds is used up before new cash moves.
pub fn payout(
    ledger: &mut Ledger,
    account: &mut CarrierAccount,
    invoice: &PartialInvoice,
    decisions: &[Decision],
    paid_at: Hours,
) -> Result<Vec<InstallmentRecord>, FinanceError> {
    if invoice.carrier_id != account.carrier_id {
        return Err(FinanceError::CarrierMismatch {
            invoice: invoice.carrier_id.clone(),
            account: account.carrier_id.clone(),
        });
    }
    let mut out = Vec::new();
    for d in decisions.iter().filter(|d| d.outcome == Outcome::Pay && d.payable.is_positive()) {
        let surplus_applied = account.draw_surplus(d.payable);
        let rec = InstallmentRecord {
            shipment_id: invoice.shipment_id.clone(),
            carrier_id: invoice.carrier_id.clone(),
            iteration: invoice.iteration,
            charge_code: d.line.charge_code.clone(),
            basis: d.line.basis,
            gross_amount: d.line.amount,
            paid_amount: d.payable,
            surplus_applied,
            paid_at,
        };
        ledger.append(PayloadKind::Installment, &rec)?;
        out.push(rec);
    }
    Ok(out)
}

fn records_for<T: serde::de::DeserializeOwned>(
    ledger: &Ledger,
    kind: PayloadKind,
    keep: impl Fn(&T) -> bool,
) -> Result<Vec<T>, FinanceError> {
    let mut out = Vec::new();
    for r in ledger.query(kind, |_| true) {
        let v: T = r.decode()?;
        if keep(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

pub fn installments_for(ledger: &Ledger, shipment_id: &str) -> Result<Vec<InstallmentRecord>, FinanceError> {
    records_for(ledger, PayloadKind::Installment, |r: &InstallmentRecord| r.shipment_id == shipment_id)
}

pub fn settlement_for(ledger: &Ledger, shipment_id: &str) -> Result<Option<SettlementResult>, FinanceError> {
    Ok(records_for(ledger, PayloadKind::Settlement, |r: &SettlementResult| r.shipment_id == shipment_id)?.pop())
}

/// Close out a shipment against its final invoice.
pub fn settle_final(
    ledger: &mut Ledger,
    final_invoice: &PartialInvoice,
    policy: &FactoringPolicy,
    account: &mut CarrierAccount,
    settled_at: Hours,
) -> Result<SettlementResult, FinanceError> {
    if !final_invoice.is_final {
        return Err(FinanceError::NotFinal(final_invoice.invoice_id.clone()));
    }
    if final_invoice.carrier_id != account.carrier_id {
        return Err(FinanceError::CarrierMismatch {
            invoice: final_invoice.carrier_id.clone(),
            account: account.carrier_id.clone(),
        });
    }
    let shipment_id = &final_invoice.shipment_id;
    if settlement_for(ledger, shipment_id)?.is_some() {
        return Err(FinanceError::AlreadySettled(shipment_id.clone()));
    }
    let paid: Cents = installments_for(ledger, shipment_id)?.iter().map(|r| r.paid_amount).sum();
    let entitlement = policy.discounted(final_invoice.total_actual);
    let (final_payment, surplus_carried) = if paid <= entitlement {
        (entitlement - paid, Cents::ZERO)
    } else {
        (Cents::ZERO, paid - entitlement)
    };
    let surplus_applied = account.draw_surplus(final_payment);
    account.surplus_balance += surplus_carried;
    let result = SettlementResult {
        shipment_id: shipment_id.clone(),
        carrier_id: account.carrier_id.clone(),
        entitlement,
        total_paid_before_final: paid,
        final_payment,
        surplus_applied,
        surplus_carried,
        settled_at,
    };
    ledger.append(PayloadKind::Settlement, &result)?;
    account.history.push(result.clone());
    Ok(result)
}

/// Record the carrier's payment to the AI service for a settled shipment.
pub fn reward_ai_service(
    ledger: &mut Ledger,
    shipment_id: &str,
    carrier_id: &str,
    amount: Cents,
    paid_at: Hours,
) -> Result<LedgerRecord, FinanceError> {
    if settlement_for(ledger, shipment_id)?.is_none() {
        return Err(FinanceError::NotSettled(shipment_id.to_string()));
    }
    let rec = RewardRecord { shipment_id: shipment_id.into(), carrier_id: carrier_id.into(), amount, paid_at };
    Ok(ledger.append(PayloadKind::Reward, &rec)?.clone())
}

#[cfg(test)]
mod tests;
