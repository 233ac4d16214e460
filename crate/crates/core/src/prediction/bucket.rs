use serde::{Deserialize, Serialize};

use super::{DwellModel, PredictedValue, PredictionError, PredictionTarget};
use crate::logistics::Milestone;

pub const BUCKET_THRESHOLDS: [u32; 3] = [24, 48, 72];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DwellBucket {
    AtMostOneDay,
    TwoDays,
    ThreeDays,
    MoreThanThreeDays,
}

impl DwellBucket {
    /// Whole dwell days used when pricing the bucket.
    pub fn days(self) -> u32 {
        match self {
            DwellBucket::AtMostOneDay => 1,
            DwellBucket::TwoDays => 2,
            DwellBucket::ThreeDays => 3,
            DwellBucket::MoreThanThreeDays => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DwellBucket::AtMostOneDay => "<=1d",
            DwellBucket::TwoDays => "2d",
            DwellBucket::ThreeDays => "3d",
            DwellBucket::MoreThanThreeDays => ">3d",
        }
    }
}

/// Make `[>24h, >48h, >72h]` monotone: any asserted bit forces every lower
/// threshold on.
pub fn repair_bits(bits: [bool; 3]) -> [bool; 3] {
    let mut out = bits;
    for i in (0..2).rev() {
        out[i] = out[i] || out[i + 1];
    }
    out
}

pub fn bucket_from_bits(bits: [bool; 3]) -> DwellBucket {
    match repair_bits(bits) {
        [false, _, _] => DwellBucket::AtMostOneDay,
        [true, false, _] => DwellBucket::TwoDays,
        [true, true, false] => DwellBucket::ThreeDays,
        [true, true, true] => DwellBucket::MoreThanThreeDays,
    }
}

/// One classifier per bucket threshold, in ascending threshold order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdModels {
    models: [DwellModel; 3],
}

impl ThresholdModels {
    pub fn new(models: Vec<DwellModel>) -> Result<ThresholdModels, PredictionError> {
        let mut models = models;
        models.sort_by_key(|m| m.threshold_hours);
        let got: Vec<u32> = models.iter().map(|m| m.threshold_hours).collect();
        if got != BUCKET_THRESHOLDS {
            return Err(PredictionError::ThresholdSet(got));
        }
        let models: [DwellModel; 3] = models.try_into().map_err(|_| PredictionError::ThresholdSet(got))?;
        Ok(ThresholdModels { models })
    }

    pub fn models(&self) -> &[DwellModel; 3] {
        &self.models
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellBucketPrediction {
    pub bucket: DwellBucket,
    pub scores: [f64; 3],
    pub raw_bits: [bool; 3],
    pub bits: [bool; 3],
}

impl DwellBucketPrediction {
    pub fn repaired(&self) -> bool {
        self.raw_bits != self.bits
    }

    /// The least certain of the three threshold decisions.
    pub fn confidence(&self) -> f64 {
        self.scores.iter().map(|&s| s.max(1.0 - s)).fold(1.0, f64::min)
    }

    pub fn explanation(&self) -> String {
        let b = |bits: [bool; 3]| bits.map(|x| if x { '1' } else { '0' }).iter().collect::<String>();
        if self.repaired() {
            format!("bucket {} from bits {} (repaired from {})", self.bucket.label(), b(self.bits), b(self.raw_bits))
        } else {
            format!("bucket {} from bits {}", self.bucket.label(), b(self.bits))
        }
    }

    pub fn to_predicted_value(
        &self,
        shipment_id: &str,
        port: &str,
        charge_code: Option<&str>,
        produced_at: Milestone,
    ) -> PredictedValue {
        PredictedValue {
            shipment_id: shipment_id.to_string(),
            target: PredictionTarget::DwellDays { port: port.to_string() },
            value: f64::from(self.bucket.days()),
            score: self.confidence(),
            charge_code: charge_code.map(str::to_string),
            produced_at_milestone: produced_at,
        }
    }
}

pub fn predict_dwell_bucket(
    models: &ThresholdModels,
    sequence: &[Vec<f64>],
) -> Result<DwellBucketPrediction, PredictionError> {
    let mut scores = [0.0; 3];
    for (s, m) in scores.iter_mut().zip(models.models.iter()) {
        *s = m.score(sequence)?;
    }
    let raw_bits = scores.map(|s| s > 0.5);
    let bits = repair_bits(raw_bits);
    Ok(DwellBucketPrediction { bucket: bucket_from_bits(bits), scores, raw_bits, bits })
}
