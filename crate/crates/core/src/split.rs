//! Cross-validation splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ExpandedTable;
use crate::rng::RngStream;

/// Row-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n: usize,
    pub k: u32,
    /// Fold index per row, each in `0..k`.
    pub assignments: Vec<u32>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitPlan {
    /// Rows held out for fold `f`.
    pub fn test_rows(&self, fold: u32) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Rows trained on for fold `f`.
    pub fn train_rows(&self, fold: u32) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// Single train/test split from an explicit test mask, expressed as a
    /// one-fold plan (fold 0 is the test partition).
    pub fn from_mask(test_mask: &[bool]) -> Result<Self> {
        if test_mask.iter().all(|t| *t) || !test_mask.iter().any(|t| *t) {
            return Err(Error::Config(
                "test mask must select a non-empty strict subset".into(),
            ));
        }
        Ok(SplitPlan {
            n: test_mask.len(),
            k: 1,
            assignments: test_mask.iter().map(|&t| if t { 0 } else { 1 }).collect(),
            seed: 0,
            stratified: false,
        })
    }

    /// Folds actually usable as held-out sets (`0..k`).
    pub fn folds(&self) -> std::ops::Range<u32> {
        0..self.k
    }
}

/// Deterministic k-fold partition.
///
/// Stratified mode shuffles each class separately and deals rows round-robin
/// across folds, keeping per-class counts within one of each other. A class
/// with fewer samples than `k` cannot be stratified and is an error.
pub fn make_splits(
    table: &ExpandedTable,
    k: u32,
    seed: u64,
    stratified: bool,
) -> Result<SplitPlan> {
    let n = table.n_rows();
    if k < 2 {
        return Err(Error::Config("k-fold split requires k >= 2".into()));
    }
    if (n as u64) < u64::from(k) {
        return Err(Error::Config(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }

    let mut assignments = vec![0u32; n];
    let mut rng = RngStream::from_root(seed).child("split").rng();
    if stratified {
        let c = table.n_classes() as u32;
        for class in 1..=c {
            let mut rows: Vec<usize> = (0..n).filter(|&i| table.labels[i] == class).collect();
            if (rows.len() as u64) < u64::from(k) {
                return Err(Error::Config(format!(
                    "class '{}' has {} samples, fewer than {k} folds",
                    table.class_names[(class - 1) as usize],
                    rows.len()
                )));
            }
            rows.shuffle(&mut rng);
            for (i, row) in rows.into_iter().enumerate() {
                assignments[row] = (i as u32) % k;
            }
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        for (i, row) in rows.into_iter().enumerate() {
            assignments[row] = (i as u32) % k;
        }
    }
    Ok(SplitPlan {
        n,
        k,
        assignments,
        seed,
        stratified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn table(labels: Vec<u32>, classes: usize) -> ExpandedTable {
        let n = labels.len();
        ExpandedTable {
            values: Array2::zeros((n, 3)),
            labels,
            class_names: (0..classes).map(|c| format!("c{c}")).collect(),
            feature_names: vec!["a".into(), "b".into(), "c".into()],
        }
    }

    #[test]
    fn two_hundred_rows_five_folds_of_forty() {
        let labels: Vec<u32> = (0..200).map(|i| (i % 2) as u32 + 1).collect();
        let plan = make_splits(&table(labels, 2), 5, 0, true).unwrap();
        for f in plan.folds() {
            assert_eq!(plan.test_rows(f).len(), 40);
            assert_eq!(plan.train_rows(f).len(), 160);
        }
    }

    #[test]
    fn same_seed_same_folds() {
        let labels: Vec<u32> = (0..50).map(|i| (i % 2) as u32 + 1).collect();
        let t = table(labels, 2);
        let a = make_splits(&t, 5, 42, true).unwrap();
        let b = make_splits(&t, 5, 42, true).unwrap();
        assert_eq!(a, b);
        let c = make_splits(&t, 5, 43, true).unwrap();
        assert_ne!(a.assignments, c.assignments);
    }

    #[test]
    fn stratification_keeps_class_balance() {
        // 60/40 binary labels over 100 rows -> 12/8 per fold.
        let labels: Vec<u32> = (0..100).map(|i| if i < 60 { 1 } else { 2 }).collect();
        let plan = make_splits(&table(labels.clone(), 2), 5, 7, true).unwrap();
        for f in plan.folds() {
            let test = plan.test_rows(f);
            let ones = test.iter().filter(|&&i| labels[i] == 1).count();
            let twos = test.len() - ones;
            assert!((ones as i64 - 12).abs() <= 1, "fold {f}: {ones} of class 1");
            assert!((twos as i64 - 8).abs() <= 1, "fold {f}: {twos} of class 2");
        }
    }

    #[test]
    fn folds_partition_rows() {
        let labels: Vec<u32> = (0..53).map(|i| (i % 3) as u32 + 1).collect();
        let plan = make_splits(&table(labels, 3), 4, 3, true).unwrap();
        let mut seen = [false; 53];
        for f in plan.folds() {
            for row in plan.test_rows(f) {
                assert!(!seen[row]);
                seen[row] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn small_class_fails_stratification() {
        let mut labels: Vec<u32> = vec![1; 30];
        labels.extend([2, 2, 2]); // only 3 samples of class 2
        let err = make_splits(&table(labels, 2), 5, 0, true).unwrap_err();
        assert!(err.to_string().contains("fewer than 5 folds"));
    }

    #[test]
    fn mask_plan() {
        let plan = SplitPlan::from_mask(&[true, false, false, true]).unwrap();
        assert_eq!(plan.test_rows(0), vec![0, 3]);
        assert_eq!(plan.train_rows(0), vec![1, 2]);
        assert!(SplitPlan::from_mask(&[true, true]).is_err());
    }
}
