use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PredictionError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl Confusion {
    pub fn tally(predictions: &[bool], labels: &[bool]) -> Result<Confusion, PredictionError> {
        if predictions.len() != labels.len() {
            return Err(PredictionError::LengthMismatch(predictions.len(), labels.len()));
        }
        let mut c = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.tn + self.fp
    }

    /// Mean of true-positive and true-negative rates.
    pub fn balanced_accuracy(&self) -> Result<f64, PredictionError> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        if pos == 0 || neg == 0 {
            return Err(PredictionError::UndefinedAccuracy(pos > 0));
        }
        let tpr = self.tp as f64 / pos as f64;
        let tnr = self.tn as f64 / neg as f64;
        Ok((tpr + tnr) / 2.0)
    }
}

pub fn balanced_accuracy(predictions: &[bool], labels: &[bool]) -> Result<f64, PredictionError> {
    Confusion::tally(predictions, labels)?.balanced_accuracy()
}

/// Shuffle each class separately with `seed` and hold out
/// `round(n_class × test_fraction)` of it. Returns `(train, test)` indices,
/// each sorted ascending.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_is_one() {
        let y = [true, false, true, false, false];
        assert_eq!(balanced_accuracy(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn constant_predictor_is_one_half() {
        let y = [true, false, false, false, true, false];
        assert_eq!(balanced_accuracy(&[true; 6], &y).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&[false; 6], &y).unwrap(), 0.5);
    }

    #[test]
    fn confusion_7_3_6_4() {
        let c = Confusion { tp: 7, fn_: 3, tn: 6, fp: 4 };
        assert!((c.balanced_accuracy().unwrap() - 0.65).abs() < 1e-12);
    }

    #[test]
    fn single_class_labels_rejected() {
        assert_eq!(balanced_accuracy(&[true, false], &[true, true]), Err(PredictionError::UndefinedAccuracy(true)));
        assert_eq!(balanced_accuracy(&[true], &[false]), Err(PredictionError::UndefinedAccuracy(false)));
        assert!(matches!(balanced_accuracy(&[true], &[true, false]), Err(PredictionError::LengthMismatch(1, 2))));
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<bool> = (0..103).map(|i| i % 3 == 0).collect();
        let (train, test) = stratified_split(&labels, 0.2, 4);
        assert_eq!(train.len() + test.len(), labels.len());
        let pos = labels.iter().filter(|&&y| y).count();
        let test_pos = test.iter().filter(|&&i| labels[i]).count();
        assert_eq!(test_pos, ((pos as f64) * 0.2).round() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        assert_eq!(stratified_split(&labels, 0.2, 4), (train, test));
    }

    proptest! {
        #[test]
        fn swapping_classes_preserves_score(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 2..60)) {
            let p: Vec<bool> = pairs.iter().map(|x| x.0).collect();
            let y: Vec<bool> = pairs.iter().map(|x| x.1).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let np: Vec<bool> = p.iter().map(|b| !b).collect();
            let ny: Vec<bool> = y.iter().map(|b| !b).collect();
            let a = balanced_accuracy(&p, &y).unwrap();
            let b = balanced_accuracy(&np, &ny).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
