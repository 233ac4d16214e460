//! The trade-logistics side: lanes, milestone timelines, service contracts
//! and the iterative carrier invoice.

mod charges;
mod invoice;
mod lane;
mod timeline;

use thiserror::Error;

pub use charges::{
    dwell_days, dwell_excess_fee, dwell_time, ChargeDefinition, CompKind, DwellMeasurement, PlanKind, ServiceContract,
    BASE_PER_DAY, FLAT_AMOUNT, INCREMENT_PER_DAY,
};
pub use invoice::{compute_invoice, Basis, ChargeLine, PartialInvoice};
pub use lane::{valid_port_code, Milestone, Port, PortRole, ShippingLane};
pub use timeline::{EventStatus, Hours, MilestoneEvent, Timeline};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LogisticsError {
    #[error("lane {lane_id}: {reason}")]
    InvalidLane { lane_id: String, reason: String },
    #[error("charge {charge_code}: {reason}")]
    InvalidCharge { charge_code: String, reason: String },
    #[error("contract {contract_id}: {reason}")]
    InvalidContract { contract_id: String, reason: String },
    #[error("cannot parse milestone {0:?}")]
    BadMilestone(String),
    #[error("{shipment_id}: second Actual {milestone} (first reported by {first_source})")]
    DuplicateActual { shipment_id: String, milestone: Milestone, first_source: String },
    #[error("{shipment_id}: departure from {port} at {departure}h precedes arrival at {arrival}h")]
    NegativeDwell { shipment_id: String, port: String, arrival: Hours, departure: Hours },
    #[error("no events recorded for shipment {0}")]
    UnknownShipment(String),
    #[error("prediction refers to charge {0} which is not in the contract")]
    UnknownCharge(String),
    #[error("charge {charge_code}: cannot price a {target} prediction")]
    UnusablePrediction { charge_code: String, target: String },
    #[error("final invoice: charge {charge_code} has no actual dwell at {port}")]
    MissingActual { charge_code: String, port: String },
}
