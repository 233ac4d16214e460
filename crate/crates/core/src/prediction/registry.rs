use serde::{Deserialize, Serialize};

use crate::logistics::Milestone;

/// Held-out evaluation of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub balanced_accuracy: f64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    pub lane_id: String,
    pub milestone: Milestone,
    /// Charge code the model prices, or a target name for unpriced models.
    pub target: String,
    pub balanced_accuracy: f64,
    pub sample_count: u64,
}

/// Historical accuracy per (lane, milestone, charge/target), as the bank
/// sees it. Entries are kept sorted by key so serialization is canonical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "RegistryFile")]
pub struct AccuracyRegistry {
    entries: Vec<RegistryEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    entries: Vec<RegistryEntry>,
}

impl From<RegistryFile> for AccuracyRegistry {
    fn from(file: RegistryFile) -> Self {
        let mut r = AccuracyRegistry::new();
        for e in file.entries {
            let eval = EvalResult { balanced_accuracy: e.balanced_accuracy, sample_count: e.sample_count };
            r.update(&e.lane_id, &e.milestone, &e.target, eval);
        }
        r
    }
}

impl AccuracyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn position(&self, lane_id: &str, milestone: &Milestone, target: &str) -> Result<usize, usize> {
        let key = (lane_id, milestone.to_string(), target);
        self.entries.binary_search_by(|e| (e.lane_id.as_str(), e.milestone.to_string(), e.target.as_str()).cmp(&key))
    }

    pub fn lookup(&self, lane_id: &str, milestone: &Milestone, target: &str) -> Option<&RegistryEntry> {
        self.position(lane_id, milestone, target).ok().map(|i| &self.entries[i])
    }

    /// Insert or replace. Results outside `[0, 1]` or with no samples are
    /// clamped / ignored respectively.
    pub fn update(&mut self, lane_id: &str, milestone: &Milestone, target: &str, eval: EvalResult) {
        if eval.sample_count == 0 || !eval.balanced_accuracy.is_finite() {
            return;
        }
        let entry = RegistryEntry {
            lane_id: lane_id.to_string(),
            milestone: milestone.clone(),
            target: target.to_string(),
            balanced_accuracy: eval.balanced_accuracy.clamp(0.0, 1.0),
            sample_count: eval.sample_count,
        };
        match self.position(lane_id, milestone, target) {
            Ok(i) => self.entries[i] = entry,
            Err(i) => self.entries.insert(i, entry),
        }
    }
}

pub fn update_registry(
    mut registry: AccuracyRegistry,
    lane_id: &str,
    milestone: &Milestone,
    target: &str,
    eval: EvalResult,
) -> AccuracyRegistry {
    registry.update(lane_id, milestone, target, eval);
    registry
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{from_canonical, to_canonical};

    fn dep(p: &str) -> Milestone {
        Milestone::VesselDeparture(p.into())
    }

    #[test]
    fn first_eval_creates_entry() {
        let r = update_registry(
            AccuracyRegistry::new(),
            "SHA-SIN-RTM",
            &dep("CNSHA"),
            "DWELL_EXCESS_FEE",
            EvalResult { balanced_accuracy: 0.7027, sample_count: 412 },
        );
        assert_eq!(r.len(), 1);
        let e = r.lookup("SHA-SIN-RTM", &dep("CNSHA"), "DWELL_EXCESS_FEE").unwrap();
        assert_eq!((e.balanced_accuracy, e.sample_count), (0.7027, 412));
        assert!(r.lookup("SHA-SIN-RTM", &dep("SGSIN"), "DWELL_EXCESS_FEE").is_none());
    }

    #[test]
    fn re_eval_replaces() {
        let mut r = AccuracyRegistry::new();
        r.update("L", &dep("A"), "X", EvalResult { balanced_accuracy: 0.6, sample_count: 10 });
        r.update("L", &dep("A"), "X", EvalResult { balanced_accuracy: 0.8, sample_count: 25 });
        assert_eq!(r.len(), 1);
        assert_eq!(r.entries()[0].balanced_accuracy, 0.8);
        assert_eq!(r.entries()[0].sample_count, 25);
    }

    #[test]
    fn order_independent_and_canonical_round_trip() {
        let evals = [
            ("L2", dep("B"), "X", 0.71),
            ("L1", Milestone::VesselArrival("B".into()), "X", 0.77),
            ("L1", dep("A"), "Y", 0.5),
            ("L1", dep("A"), "X", 0.7027),
        ];
        let mut a = AccuracyRegistry::new();
        let mut b = AccuracyRegistry::new();
        for (l, m, t, v) in evals.iter() {
            a.update(l, m, t, EvalResult { balanced_accuracy: *v, sample_count: 3 });
        }
        for (l, m, t, v) in evals.iter().rev() {
            b.update(l, m, t, EvalResult { balanced_accuracy: *v, sample_count: 3 });
        }
        let bytes = to_canonical(&a).unwrap();
        assert_eq!(bytes, to_canonical(&b).unwrap());
        let back: AccuracyRegistry = from_canonical(&bytes).unwrap();
        assert_eq!(back, a);
        assert_eq!(to_canonical(&back).unwrap(), bytes);
    }
}
