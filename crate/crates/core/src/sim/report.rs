use std::fmt;

use serde::{Deserialize, Serialize};

use super::{day_of, run, Method, Scenario, SimError};
use crate::ledger::Digest;
use crate::logistics::Hours;
use crate::money::Cents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Shipper,
    Carrier,
    Bank,
    AiService,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Party {
    pub role: Role,
    pub id: String,
}

impl Party {
    pub fn new(role: Role, id: &str) -> Party {
        Party { role, id: id.to_string() }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", format!("{:?}", self.role).to_lowercase(), self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CashFlow {
    pub day: i64,
    pub hour: Hours,
    pub payer: Party,
    pub payee: Party,
    pub amount: Cents,
    pub shipment_id: String,
    pub memo: String,
}

/// Money movements of one method over one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodReport {
    pub scenario: String,
    pub method: Method,
    /// Sorted by hour; equal hours keep the order they were booked in.
    pub flows: Vec<CashFlow>,
    /// Cash the carriers received from shipper or bank.
    pub carrier_received: Cents,
    /// Cash the carriers paid out (AI service rewards).
    pub carrier_paid: Cents,
    pub shipper_paid: Cents,
    /// Shipper repayments received minus cash advanced to carriers.
    pub bank_margin: Cents,
    pub first_cash_day: Option<i64>,
    pub logistics_state_hash: Digest,
    pub finance_state_hash: Digest,
}

impl MethodReport {
    pub fn new(scenario: &str, method: Method, mut flows: Vec<CashFlow>, logistics: Digest, finance: Digest) -> Self {
        flows.sort_by_key(|f| f.hour);
        let sum = |keep: &dyn Fn(&CashFlow) -> bool| flows.iter().filter(|f| keep(f)).map(|f| f.amount).sum::<Cents>();
        let carrier_received = sum(&|f| f.payee.role == Role::Carrier);
        let carrier_paid = sum(&|f| f.payer.role == Role::Carrier);
        let shipper_paid = sum(&|f| f.payer.role == Role::Shipper);
        let bank_margin = sum(&|f| f.payee.role == Role::Bank) - sum(&|f| f.payer.role == Role::Bank);
        let first_cash_day = flows.iter().find(|f| f.payee.role == Role::Carrier).map(|f| f.day);
        MethodReport {
            scenario: scenario.to_string(),
            method,
            flows,
            carrier_received,
            carrier_paid,
            shipper_paid,
            bank_margin,
            first_cash_day,
            logistics_state_hash: logistics,
            finance_state_hash: finance,
        }
    }

    pub fn summary(&self) -> MethodSummary {
        MethodSummary {
            method: self.method,
            first_cash_day: self.first_cash_day,
            carrier_received: self.carrier_received,
            carrier_net: self.carrier_received - self.carrier_paid,
            shipper_paid: self.shipper_paid,
            bank_margin: self.bank_margin,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

impl fmt::Display for MethodReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} / {}", self.scenario, self.method)?;
        writeln!(f, "  {:>4} {:>6}  {:<22} {:<22} {:>12}  {:<8} memo", "day", "hour", "payer", "payee", "amount", "shipment")?;
        for c in &self.flows {
            writeln!(
                f,
                "  {:>4} {:>6}  {:<22} {:<22} {:>12}  {:<8} {}",
                c.day,
                c.hour,
                c.payer.to_string(),
                c.payee.to_string(),
                c.amount.to_string(),
                c.shipment_id,
                c.memo
            )?;
        }
        writeln!(f, "  carrier received   {}", self.carrier_received)?;
        if self.carrier_paid.is_positive() {
            writeln!(f, "  carrier paid out   {}", self.carrier_paid)?;
        }
        writeln!(f, "  shipper paid       {}", self.shipper_paid)?;
        writeln!(f, "  bank margin        {}", self.bank_margin)?;
        match self.first_cash_day {
            Some(d) => writeln!(f, "  first carrier cash day {d}")?,
            None => writeln!(f, "  carrier received no cash")?,
        }
        writeln!(f, "  logistics state    {}", self.logistics_state_hash)?;
        write!(f, "  finance state      {}", self.finance_state_hash)
    }
}

/// Per-method cash flows for one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CashFlowReport {
    pub scenario: String,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub first_cash_day: Option<i64>,
    pub carrier_received: Cents,
    pub carrier_net: Cents,
    pub shipper_paid: Cents,
    pub bank_margin: Cents,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub summaries: Vec<MethodSummary>,
    /// Accelerated bank margin minus classic bank margin.
    pub margin_gain_over_classic: Cents,
    /// Days by which accelerated first cash precedes classic first cash.
    pub acceleration_days: Option<i64>,
    pub report: CashFlowReport,
}

impl Comparison {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes") + "\n"
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.scenario)?;
        writeln!(f, "  {:<22} {:>10} {:>14} {:>14} {:>14}", "method", "first day", "carrier cash", "shipper paid", "bank margin")?;
        for s in &self.summaries {
            let day = s.first_cash_day.map_or("-".to_string(), |d| d.to_string());
            writeln!(
                f,
                "  {:<22} {:>10} {:>14} {:>14} {:>14}",
                s.method.to_string(),
                day,
                s.carrier_net.to_string(),
                s.shipper_paid.to_string(),
                s.bank_margin.to_string()
            )?;
        }
        writeln!(f, "  bank margin gain, accelerated over classic: {}", self.margin_gain_over_classic)?;
        match self.acceleration_days {
            Some(d) => write!(f, "  first cash {d} days earlier than classic factoring"),
            None => write!(f, "  no first-cash comparison (a method paid nothing)"),
        }
    }
}

/// Run the scenario once per payment method.
pub fn compare_methods(scenario: &Scenario) -> Result<Comparison, SimError> {
    let mut methods = Vec::new();
    for m in Method::ALL {
        let mut s = scenario.clone();
        s.method = m;
        methods.push(run(&s)?.report);
    }
    let summaries: Vec<MethodSummary> = methods.iter().map(MethodReport::summary).collect();
    let get = |m: Method| summaries.iter().find(|s| s.method == m).expect("every method ran");
    let (classic, acc) = (get(Method::ClassicFactoring), get(Method::AcceleratedFactoring));
    let margin_gain_over_classic = acc.bank_margin - classic.bank_margin;
    let acceleration_days = match (classic.first_cash_day, acc.first_cash_day) {
        (Some(c), Some(a)) => Some(c - a),
        _ => None,
    };
    Ok(Comparison {
        scenario: scenario.meta.name.clone(),
        summaries,
        margin_gain_over_classic,
        acceleration_days,
        report: CashFlowReport { scenario: scenario.meta.name.clone(), methods },
    })
}

pub(crate) fn flow(hour: Hours, payer: Party, payee: Party, amount: Cents, shipment_id: &str, memo: String) -> CashFlow {
    CashFlow { day: day_of(hour), hour, payer, payee, amount, shipment_id: shipment_id.to_string(), memo }
}
