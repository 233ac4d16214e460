//! Accelerated carrier invoice factoring.
//!
//! A trade-logistics ledger tracks shipment milestones and recomputes the
//! carrier invoice from actual and predicted events; a trade-finance ledger
//! imports those invoices through a quorum-attested relay and pays the
//! carrier in discounted installments gated on historical prediction
//! accuracy, settling once delivery completes.

pub mod ledger;
pub mod logistics;
pub mod money;
pub mod prediction;
pub mod relay;
pub mod finance;
pub mod sim;

pub use money::{Cents, Rate};
