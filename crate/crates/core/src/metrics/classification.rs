//! Per-cluster shape classification scores.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    /// Union of the classes seen on either side, ascending.
    pub classes: Vec<u32>,
    /// `counts[t][p]`: clusters of true class `classes[t]` predicted as `classes[p]`.
    pub counts: Vec<Vec<u64>>,
    /// `counts` with each row divided by its sum (rows without samples stay zero).
    pub confusion: Vec<Vec<f64>>,
    /// F1 per class; 0 when precision and recall are both 0.
    pub f1: Vec<f64>,
}

/// Confusion matrix and F1 scores for matched clusters.
pub fn classification_report(truth: &[u32], pred: &[u32]) -> Result<ClassificationReport> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "predicted classes",
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let mut classes: Vec<u32> = truth.iter().chain(pred).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let pos = |c: u32| classes.binary_search(&c).unwrap();
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        counts[pos(t)][pos(p)] += 1;
    }
    let confusion = counts
        .iter()
        .map(|row| {
            let s: u64 = row.iter().sum();
            row.iter().map(|&x| if s == 0 { 0.0 } else { x as f64 / s as f64 }).collect()
        })
        .collect();
    let f1 = (0..k)
        .map(|c| {
            let tp = counts[c][c] as f64;
            let predicted: u64 = counts.iter().map(|r| r[c]).sum();
            let actual: u64 = counts[c].iter().sum();
            let denom = predicted as f64 + actual as f64;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .collect();
    Ok(ClassificationReport {
        classes,
        counts,
        confusion,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let r = classification_report(&[1, 2, 1, 3], &[1, 2, 1, 3]).unwrap();
        assert_eq!(r.f1, vec![1.0; 3]);
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_predictor() {
        let r = classification_report(&[1, 1, 2, 2], &[1, 1, 1, 1]).unwrap();
        assert!((r.f1[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.f1[1], 0.0);
        assert_eq!(r.confusion[1], vec![1.0, 0.0]);
    }
}
