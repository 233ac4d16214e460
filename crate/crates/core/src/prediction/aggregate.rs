use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Per-source trust weights for estimate fusion. Unlisted sources weigh 1.0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceWeights(pub BTreeMap<String, f64>);

impl SourceWeights {
    pub fn weight(&self, source: &str) -> f64 {
        self.0.get(source).copied().unwrap_or(1.0)
    }
}

/// Fuse zero or more `(source, occurrence_time)` estimates into one.
///
/// Only the last estimate listed per source counts. The result is the
/// weighted mean of those, or `fallback` when there are none (or when every
/// remaining weight is zero).
pub fn aggregate_estimate(estimates: &[(&str, f64)], weights: &SourceWeights, fallback: Option<f64>) -> Option<f64> {
    let mut latest: BTreeMap<&str, f64> = BTreeMap::new();
    for &(src, t) in estimates {
        latest.insert(src, t);
    }
    let Some(&anchor) = latest.values().next() else {
        return fallback;
    };
    // Mean as an offset from one member, so identical inputs come back bit-exact.
    let (mut num, mut den) = (0.0, 0.0);
    for (src, &t) in latest.iter() {
        let w = weights.weight(src).max(0.0);
        num += w * (t - anchor);
        den += w;
    }
    if den <= 0.0 {
        return fallback;
    }
    Some(anchor + num / den)
}
