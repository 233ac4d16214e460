mod common;

#[test]
fn random_scenarios_close_exactly() {
    for seed in 0..200 {
        common::check_conservation(seed).unwrap();
    }
}

#[test]
fn generator_plants_surplus_sometimes() {
    use freightledger::finance::settlement_for;
    let mut with_surplus = 0;
    for seed in 0..200 {
        let (s, planted) = common::random_scenario(seed);
        let out = freightledger::sim::run(&s).unwrap();
        if planted.shipment_ids().iter().any(|id| settlement_for(&out.finance, id).unwrap().unwrap().surplus_carried.0 > 0) {
            with_surplus += 1;
        }
    }
    assert!(with_surplus >= 20, "only {with_surplus} of 200 scenarios overpaid");
}

#[test]
fn summation_oracle_matches_worked_value() {
    assert_eq!(common::Planted::fee_by_summation(3, 1, 10_000, 10_000), 30_000);
    assert_eq!(common::Planted::fee_by_summation(1, 1, 10_000, 10_000), 0);
}
