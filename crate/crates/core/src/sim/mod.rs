//! Scenario replay: drives both ledgers through a shipment's milestones for
//! one payment method, compares the three methods, and generates seeded
//! synthetic journeys for training the dwell classifiers.

mod report;
mod run;
mod scenario;
mod synthetic;

use thiserror::Error;

use crate::finance::FinanceError;
use crate::ledger::LedgerError;
use crate::logistics::LogisticsError;
use crate::prediction::PredictionError;
use crate::relay::RelayError;

pub use report::{compare_methods, CashFlow, CashFlowReport, Comparison, MethodReport, MethodSummary, Party, Role};
pub use run::{run, ShipperPayment, SimOutcome};
pub use scenario::{
    Anchors, ContractEntry, LoadedModel, Meta, Method, ModelBank, ModelRef, NetworkSpec, PredictorConfig, Scenario,
    ShipmentRef, ShipmentSpec,
};
pub use synthetic::{
    build_dataset, default_target_port, generate_synthetic, LegProfile, PortProfile, SyntheticData, SyntheticShipment, SyntheticSpec,
};

/// Day number of an hour offset: `floor(hours / 24)`.
pub fn day_of(hours: i64) -> i64 {
    hours.div_euclid(24)
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot load scenario: {0}")]
    Load(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Logistics(#[from] LogisticsError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Relay(#[from] RelayError),
    #[error(transparent)]
    Finance(#[from] FinanceError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}
