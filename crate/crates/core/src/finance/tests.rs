use proptest::prelude::*;

use super::*;
use crate::ledger::NetworkKeyring;
use crate::logistics::Milestone;
use crate::prediction::EvalResult;

const LANE: &str = "SHA-SIN-RTM";
const FEE: &str = "DWELL_EXCESS_FEE";

fn origin_departure() -> Milestone {
    Milestone::VesselDeparture("CNSHA".into())
}

fn ledger() -> Ledger {
    Ledger::new(NetworkKeyring::derive("trade-finance", &["bank", "carrier", "shipper"], 2).unwrap().identity().clone())
}

fn policy(threshold: f64) -> FactoringPolicy {
    FactoringPolicy {
        policy_id: "P1".into(),
        bank_id: "bank".into(),
        carrier_id: "carrier".into(),
        lane_id: LANE.into(),
        discount_rate: Rate::from_percent(8).unwrap(),
        classic_discount_rate: Rate::from_percent(6),
        charge_rules: [(
            FEE.to_string(),
            ChargeRule { include_predicted: true, accuracy_threshold: threshold, predicted_fraction: Rate::ONE },
        )]
        .into(),
        excluded_charges: BTreeSet::new(),
        ai_reward: Cents(500),
    }
}

fn registry(acc: f64) -> AccuracyRegistry {
    let mut r = AccuracyRegistry::new();
    r.update(LANE, &origin_departure(), FEE, EvalResult { balanced_accuracy: acc, sample_count: 100 });
    r
}

fn line(code: &str, amount: i64, basis: Basis) -> ChargeLine {
    ChargeLine {
        charge_code: code.into(),
        amount: Cents(amount),
        basis,
        confidence: if basis == Basis::Actual { 1.0 } else { 0.7 },
        explanation: String::new(),
    }
}

fn invoice(shipment: &str, iteration: u32, lines: Vec<ChargeLine>, is_final: bool) -> PartialInvoice {
    let sum = |b| lines.iter().filter(|l: &&ChargeLine| l.basis == b).map(|l| l.amount).sum();
    PartialInvoice {
        invoice_id: format!("{shipment}-{iteration}"),
        shipment_id: shipment.into(),
        contract_id: "C1".into(),
        carrier_id: "carrier".into(),
        lane_id: LANE.into(),
        currency: "USD".into(),
        iteration,
        trigger_milestone: if is_final { Milestone::DeliveryComplete } else { origin_departure() },
        total_actual: sum(Basis::Actual),
        total_predicted: sum(Basis::Predicted),
        lines,
        is_final,
    }
}

#[test]
fn predicted_fee_passes_gate() {
    let inv = invoice("S1", 2, vec![line(FEE, 10_000, Basis::Predicted)], false);
    let d = decide_charges(&inv, &policy(0.70), &registry(0.7027), &PaidState::default());
    assert_eq!(d[0].outcome, Outcome::Pay);
    assert_eq!(d[0].payable, Cents(9_200));
}

#[test]
fn predicted_fee_blocked_by_stricter_gate() {
    let inv = invoice("S1", 2, vec![line(FEE, 10_000, Basis::Predicted)], false);
    let d = decide_charges(&inv, &policy(0.75), &registry(0.7027), &PaidState::default());
    assert_eq!(d[0].payable, Cents::ZERO);
    assert!(matches!(d[0].outcome, Outcome::Deferred(DeferReason::BelowThreshold { .. })));
}

#[test]
fn missing_registry_entry_defers() {
    let inv = invoice("S1", 2, vec![line(FEE, 10_000, Basis::Predicted)], false);
    let d = decide_charges(&inv, &policy(0.5), &AccuracyRegistry::new(), &PaidState::default());
    assert_eq!(d[0].outcome, Outcome::Deferred(DeferReason::NoAccuracyRecord));
}

#[test]
fn actual_tops_up_predicted_advance() {
    let paid = PaidState([(FEE.to_string(), ChargePaid { predicted: Cents(9_200), actual: None })].into());
    let inv = invoice("S1", 3, vec![line(FEE, 30_000, Basis::Actual)], false);
    let d = decide_charges(&inv, &policy(0.70), &registry(0.7027), &paid);
    assert_eq!(d[0].payable, Cents(27_600 - 9_200));
    assert_eq!(d[0].payable, Cents(18_400));
}

#[test]
fn predicted_paid_once_and_actual_paid_once() {
    let pol = policy(0.70);
    let reg = registry(0.9);
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    let i1 = invoice("S1", 1, vec![line(FEE, 10_000, Basis::Predicted)], false);
    let d = decide_charges(&i1, &pol, &reg, &PaidState::from_installments(&installments_for(&l, "S1").unwrap()));
    payout(&mut l, &mut acct, &i1, &d, 96).unwrap();
    let i2 = invoice("S1", 2, vec![line(FEE, 20_000, Basis::Predicted)], false);
    let d = decide_charges(&i2, &pol, &reg, &PaidState::from_installments(&installments_for(&l, "S1").unwrap()));
    assert_eq!(d[0].outcome, Outcome::Deferred(DeferReason::AlreadyPaid));
    let i3 = invoice("S1", 3, vec![line(FEE, 20_000, Basis::Actual)], false);
    let d = decide_charges(&i3, &pol, &reg, &PaidState::from_installments(&installments_for(&l, "S1").unwrap()));
    payout(&mut l, &mut acct, &i3, &d, 300).unwrap();
    let i4 = invoice("S1", 4, vec![line(FEE, 20_000, Basis::Actual)], false);
    let d = decide_charges(&i4, &pol, &reg, &PaidState::from_installments(&installments_for(&l, "S1").unwrap()));
    assert_eq!(d[0].outcome, Outcome::Deferred(DeferReason::AlreadyPaid));
    let total: Cents = installments_for(&l, "S1").unwrap().iter().map(|r| r.paid_amount).sum();
    assert_eq!(total, Cents(18_400));
}

#[test]
fn excluded_charges_wait_for_settlement() {
    let mut pol = policy(0.70);
    pol.charge_rules.clear();
    pol.excluded_charges.insert("PEAK_SURCHARGE".into());
    let inv = invoice("S1", 1, vec![line("PEAK_SURCHARGE", 5_000, Basis::Actual)], false);
    let d = decide_charges(&inv, &pol, &registry(0.9), &PaidState::default());
    assert_eq!(d[0].outcome, Outcome::Deferred(DeferReason::Excluded));
}

#[test]
fn payout_skips_zero_and_keeps_amounts() {
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    let inv = invoice("S1", 1, vec![], false);
    assert!(payout(&mut l, &mut acct, &inv, &[], 0).unwrap().is_empty());
    let inv = invoice(
        "S1",
        1,
        vec![line("BASE_FREIGHT", 10_000, Basis::Actual), line("X", 0, Basis::Actual), line("Y", 2_500, Basis::Actual)],
        false,
    );
    let d = decide_charges(&inv, &policy(0.7), &registry(0.9), &PaidState::default());
    let recs = payout(&mut l, &mut acct, &inv, &d, 96).unwrap();
    assert_eq!(recs.iter().map(|r| r.paid_amount).collect::<Vec<_>>(), vec![Cents(9_200), Cents(2_300)]);
    assert_eq!(l.len(), 2);
}

fn pay(l: &mut Ledger, acct: &mut CarrierAccount, shipment: &str, amount: i64) {
    let inv = invoice(shipment, 1, vec![line("BASE_FREIGHT", amount, Basis::Actual)], false);
    let d = vec![Decision { line: inv.lines[0].clone(), payable: Cents(amount), outcome: Outcome::Pay }];
    payout(l, acct, &inv, &d, 96).unwrap();
}

#[test]
fn settlement_exact_entitlement() {
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    pay(&mut l, &mut acct, "S1", 9_200);
    let fin = invoice("S1", 2, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], true);
    let s = settle_final(&mut l, &fin, &policy(0.7), &mut acct, 744).unwrap();
    assert_eq!((s.entitlement, s.final_payment, s.surplus_carried), (Cents(9_200), Cents(0), Cents(0)));
}

#[test]
fn settlement_pays_balance() {
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    pay(&mut l, &mut acct, "S1", 6_000);
    let fin = invoice("S1", 2, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], true);
    let s = settle_final(&mut l, &fin, &policy(0.7), &mut acct, 744).unwrap();
    assert_eq!(s.final_payment, Cents(3_200));
    assert_eq!(s.surplus_carried, Cents(0));
}

#[test]
fn surplus_carries_to_next_shipment() {
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    pay(&mut l, &mut acct, "S1", 9_500);
    let fin = invoice("S1", 2, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], true);
    let s = settle_final(&mut l, &fin, &policy(0.7), &mut acct, 744).unwrap();
    assert_eq!((s.final_payment, s.surplus_carried), (Cents(0), Cents(300)));
    assert_eq!(acct.surplus_balance, Cents(300));

    let inv = invoice("S2", 1, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], false);
    let d = decide_charges(&inv, &policy(0.7), &registry(0.9), &PaidState::default());
    let recs = payout(&mut l, &mut acct, &inv, &d, 800).unwrap();
    assert_eq!(recs[0].paid_amount, Cents(9_200));
    assert_eq!(recs[0].surplus_applied, Cents(300));
    assert_eq!(recs[0].cash(), Cents(8_900));
    assert_eq!(acct.surplus_balance, Cents(0));
}

#[test]
fn settlement_preconditions() {
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    let not_final = invoice("S1", 1, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], false);
    assert!(matches!(settle_final(&mut l, &not_final, &policy(0.7), &mut acct, 0), Err(FinanceError::NotFinal(_))));
    let fin = invoice("S1", 2, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], true);
    settle_final(&mut l, &fin, &policy(0.7), &mut acct, 744).unwrap();
    assert!(matches!(settle_final(&mut l, &fin, &policy(0.7), &mut acct, 745), Err(FinanceError::AlreadySettled(_))));
    let mut other = CarrierAccount::new("someone-else");
    let fin2 = invoice("S2", 2, vec![], true);
    assert!(matches!(settle_final(&mut l, &fin2, &policy(0.7), &mut other, 0), Err(FinanceError::CarrierMismatch { .. })));
}

#[test]
fn reward_requires_settlement() {
    let mut l = ledger();
    let mut acct = CarrierAccount::new("carrier");
    let pol = policy(0.7);
    assert_eq!(
        reward_ai_service(&mut l, "S1", "carrier", pol.ai_reward, 0).unwrap_err(),
        FinanceError::NotSettled("S1".into())
    );
    let fin = invoice("S1", 2, vec![line("BASE_FREIGHT", 10_000, Basis::Actual)], true);
    settle_final(&mut l, &fin, &pol, &mut acct, 744).unwrap();
    let r = reward_ai_service(&mut l, "S1", "carrier", pol.ai_reward, 744).unwrap();
    let rec: RewardRecord = r.decode().unwrap();
    assert_eq!(rec.amount, Cents(500));
    assert_eq!(l.query(PayloadKind::Reward, |_| true).len(), 1);
}

#[test]
fn policy_validation() {
    let mut p = policy(0.7);
    assert!(p.validate().is_ok());
    p.excluded_charges.insert(FEE.into());
    assert!(p.validate().is_err());
    let mut p = policy(1.5);
    assert!(p.validate().is_err());
    p = policy(0.7);
    p.discount_rate = Rate::ONE;
    assert!(p.validate().is_err());
}

proptest! {
    #[test]
    fn raising_threshold_never_admits_more(
        accs in prop::collection::vec(0.0f64..=1.0, 1..6),
        t1 in 0.0f64..=1.0,
        dt in 0.0f64..=0.5,
    ) {
        let t2 = (t1 + dt).min(1.0);
        let mut reg = AccuracyRegistry::new();
        let mut lines = Vec::new();
        let mut lo = policy(t1);
        let mut hi = policy(t2);
        for (i, a) in accs.iter().enumerate() {
            let code = format!("C{i}");
            reg.update(LANE, &origin_departure(), &code, EvalResult { balanced_accuracy: *a, sample_count: 5 });
            let rule = ChargeRule { include_predicted: true, accuracy_threshold: t1, predicted_fraction: Rate::ONE };
            lo.charge_rules.insert(code.clone(), rule.clone());
            hi.charge_rules.insert(code.clone(), ChargeRule { accuracy_threshold: t2, ..rule });
            lines.push(line(&code, 1_000, Basis::Predicted));
        }
        let inv = invoice("S", 1, lines, false);
        let admitted = |p: &FactoringPolicy| -> BTreeSet<String> {
            decide_charges(&inv, p, &reg, &PaidState::default())
                .into_iter()
                .filter(|d| d.outcome == Outcome::Pay)
                .map(|d| d.line.charge_code)
                .collect()
        };
        prop_assert!(admitted(&hi).is_subset(&admitted(&lo)));
    }

    #[test]
    fn cumulative_per_charge_capped_once_actual(
        predicted in 0i64..1_000_000,
        actual in 0i64..1_000_000,
        frac_ppm in 1u32..=1_000_000,
        disc_ppm in 0u32..500_000,
    ) {
        let mut pol = policy(0.0);
        pol.discount_rate = Rate::from_ppm(disc_ppm).unwrap();
        pol.charge_rules.get_mut(FEE).unwrap().predicted_fraction = Rate::from_ppm(frac_ppm).unwrap();
        let reg = registry(1.0);
        let mut l = ledger();
        let mut acct = CarrierAccount::new("carrier");
        for (i, (amt, basis)) in [(predicted, Basis::Predicted), (actual, Basis::Actual)].into_iter().enumerate() {
            let inv = invoice("S", i as u32 + 1, vec![line(FEE, amt, basis)], false);
            let paid = PaidState::from_installments(&installments_for(&l, "S").unwrap());
            let d = decide_charges(&inv, &pol, &reg, &paid);
            payout(&mut l, &mut acct, &inv, &d, 0).unwrap();
        }
        let total: Cents = installments_for(&l, "S").unwrap().iter().map(|r| r.paid_amount).sum();
        let cap = Cents(actual).discounted(pol.discount_rate);
        let advance = Cents(predicted).scale2_floor(Rate::from_ppm(frac_ppm).unwrap(), pol.discount_rate.complement());
        // payments made once the actual is known only ever lift the total up to the cap
        prop_assert_eq!(total, cap.max(advance));
    }
}
