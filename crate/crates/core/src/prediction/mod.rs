//! The AI service: multi-source estimate fusion, journey feature
//! extraction, a small recurrent dwell-time classifier trained with
//! backpropagation through time, and the accuracy registry the bank reads.

mod aggregate;
mod bucket;
mod features;
mod metrics;
mod model_file;
mod registry;
mod rnn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logistics::{LogisticsError, Milestone};

pub use aggregate::{aggregate_estimate, SourceWeights};
pub use bucket::{bucket_from_bits, predict_dwell_bucket, repair_bits, DwellBucket, DwellBucketPrediction, ThresholdModels};
pub use features::{extract_features, FeatureVector, PortOps, ShipmentContext, VesselInfo};
pub use metrics::{balanced_accuracy, stratified_split, Confusion};
pub use model_file::{MODEL_FORMAT, MODEL_VERSION};
pub use registry::{update_registry, AccuracyRegistry, EvalResult, RegistryEntry};
pub use rnn::{train, Gradients, Hyperparams, Normalizer, Rnn, DwellModel, TrainingMeta};

/// Source name on estimates the AI service publishes. Feature extraction
/// ignores these so the service never feeds on its own output.
pub const AI_SOURCE: &str = "ai-service";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredictionTarget {
    DwellClass { port: String, threshold_hours: u32 },
    /// Bucketed dwell prediction, value in whole days (4 means "more than 3").
    DwellDays { port: String },
    ArrivalDelay { port: String },
    VoyageTime { from: String, to: String },
    DepartureDelay { port: String },
}

/// One output of the AI service for one shipment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictedValue {
    pub shipment_id: String,
    pub target: PredictionTarget,
    /// Class bit (0/1), whole days or hours depending on the target.
    pub value: f64,
    /// Model output in `[0, 1]`; invoice lines carry it as their confidence.
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge_code: Option<String>,
    pub produced_at_milestone: Milestone,
}

impl PredictedValue {
    pub fn validate(&self) -> Result<(), PredictionError> {
        if !(0.0..=1.0).contains(&self.score) || !self.value.is_finite() {
            return Err(PredictionError::InvalidPrediction(format!(
                "{}: score {} / value {} out of range",
                self.shipment_id, self.score, self.value
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PredictionError {
    #[error("sequence step {step} has {got} features, model expects {expected}")]
    DimensionMismatch { step: usize, expected: usize, got: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("training set has only class {0}; both classes are needed")]
    SingleClass(bool),
    #[error("labels contain only class {0}; balanced accuracy is undefined")]
    UndefinedAccuracy(bool),
    #[error("predictions ({0}) and labels ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("{milestone} is not a port event on lane {lane_id}")]
    LaneMismatch { lane_id: String, milestone: Milestone },
    #[error("shipment {shipment_id}: {milestone} has not actually occurred")]
    NotOccurred { shipment_id: String, milestone: Milestone },
    #[error("shipment {shipment_id}: no planned time for {milestone}")]
    MissingPlan { shipment_id: String, milestone: Milestone },
    #[error("need models for 24h, 48h and 72h thresholds, got {0:?}")]
    ThresholdSet(Vec<u32>),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Logistics(#[from] LogisticsError),
}
