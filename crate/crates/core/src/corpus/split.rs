use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledHistogramSet};
use crate::label::Label;

/// Train/test partition of row indices; both lists are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// `n * fraction` rounded half up; the epsilon absorbs representation error
/// in products such as `5 * 0.3`.
pub(crate) fn proportional(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction + 0.5 + 1e-9).floor() as usize).min(n)
}

fn check_fraction(test_fraction: f64) -> Result<(), CorpusError> {
    if test_fraction > 0.0 && test_fraction < 1.0 {
        Ok(())
    } else {
        Err(CorpusError::InvalidFraction(test_fraction))
    }
}

/// Seeded stratified split: each class is shuffled and the first
/// `round(n_c * test_fraction)` of it go to test.
pub fn split_labels(labels: &[Label], test_fraction: f64, seed: u64) -> Result<Split, CorpusError> {
    check_fraction(test_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(CorpusError::MissingClass(class));
        }
        members.shuffle(&mut rng);
        let n_test = proportional(members.len(), test_fraction);
        if n_test == members.len() {
            return Err(CorpusError::DegenerateClass(class));
        }
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        seed,
        test_fraction,
    })
}

pub fn stratified_split(
    set: &LabeledHistogramSet,
    test_fraction: f64,
    seed: u64,
) -> Result<Split, CorpusError> {
    split_labels(&set.labels(), test_fraction, seed)
}

/// Unstratified split: one shuffle of all rows. Class balance in the test
/// part is left to chance.
pub fn random_split(n: usize, test_fraction: f64, seed: u64) -> Result<Split, CorpusError> {
    check_fraction(test_fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = proportional(n, test_fraction);
    let (test, train) = idx.split_at(n_test);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        seed,
        test_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(b: usize, m: usize) -> Vec<Label> {
        let mut v = vec![Label::Benign; b];
        v.extend(vec![Label::Malware; m]);
        v
    }

    fn test_counts(l: &[Label], s: &Split) -> (usize, usize) {
        let m = s.test.iter().filter(|&&i| l[i] == Label::Malware).count();
        (s.test.len() - m, m)
    }

    #[test]
    fn exact_proportions() {
        let l = labels(10, 10);
        for seed in 0..5 {
            let s = split_labels(&l, 0.2, seed).unwrap();
            assert_eq!(test_counts(&l, &s), (2, 2));
            assert_eq!(s.train.len(), 16);
        }
        let l = labels(5, 5);
        assert_eq!(test_counts(&l, &split_labels(&l, 0.2, 9).unwrap()), (1, 1));
    }

    #[test]
    fn half_rounds_up() {
        assert_eq!(proportional(5, 0.3), 2);
        assert_eq!(proportional(5, 0.1), 1);
        assert_eq!(proportional(4, 0.1), 0);
        assert_eq!(proportional(10, 0.2), 2);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let l = labels(30, 20);
        assert_eq!(
            split_labels(&l, 0.2, 7).unwrap(),
            split_labels(&l, 0.2, 7).unwrap()
        );
        assert_ne!(
            split_labels(&l, 0.2, 7).unwrap(),
            split_labels(&l, 0.2, 8).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            split_labels(&labels(3, 3), 0.0, 1),
            Err(CorpusError::InvalidFraction(_))
        ));
        assert!(matches!(
            split_labels(&labels(3, 0), 0.2, 1),
            Err(CorpusError::MissingClass(Label::Malware))
        ));
        assert!(matches!(
            split_labels(&labels(1, 5), 0.5, 1),
            Err(CorpusError::DegenerateClass(Label::Benign))
        ));
    }

    #[test]
    fn unstratified_partitions() {
        let s = random_split(23, 0.2, 3).unwrap();
        assert_eq!(s.test.len(), 5);
        let mut all: Vec<_> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }
}
