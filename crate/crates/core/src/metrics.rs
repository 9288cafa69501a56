//! Evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdlError};
use crate::linalg::io::fmt_f64;
use crate::linalg::DenseMatrix;

/// `‖X − WH‖²_F / ‖X‖²_F`.
pub fn relative_recon(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
    if w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows() {
        return Err(SdlError::argument("factor shapes do not conform to the data"));
    }
    let denom = x.frobenius_norm_sq();
    if denom == 0.0 {
        return Err(SdlError::argument("relative reconstruction error of a zero matrix"));
    }
    Ok((x - &w.matmul(h)).frobenius_norm_sq() / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub recon_rel: Option<f64>,
    /// `confusion[t][p]` counts truth `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalSummary {
    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }

    pub fn csv_header() -> &'static str {
        "accuracy,f_score,precision,recall,recon_rel"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            fmt_f64(self.accuracy),
            fmt_f64(self.f_score),
            fmt_f64(self.precision),
            fmt_f64(self.recall),
            self.recon_rel.map(fmt_f64).unwrap_or_default()
        )
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy, confusion matrix and F-score.
///
/// `positive = Some(c)` gives the binary F-score for class `c`; `None` gives
/// the macro average over all classes. Undefined precision or recall count
/// as 0.
pub fn classification_metrics(pred: &[usize], truth: &[usize], positive: Option<usize>) -> Result<EvalSummary> {
    if pred.len() != truth.len() {
        return Err(SdlError::argument("prediction and truth lengths differ"));
    }
    let k = pred.iter().chain(truth).copied().max().map_or(2, |m| (m + 1).max(2));
    let k = positive.map_or(k, |c| k.max(c + 1));
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = ratio(correct, pred.len());
    let class_pr = |c: usize| {
        let tp = confusion[c][c];
        let predicted: usize = (0..k).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        (ratio(tp, predicted), ratio(tp, actual))
    };
    let (precision, recall, f_score) = match positive {
        Some(c) => {
            let (p, r) = class_pr(c);
            (p, r, f1(p, r))
        }
        None => {
            let mut acc = (0.0, 0.0, 0.0);
            for c in 0..k {
                let (p, r) = class_pr(c);
                acc = (acc.0 + p, acc.1 + r, acc.2 + f1(p, r));
            }
            let kf = k as f64;
            (acc.0 / kf, acc.1 / kf, acc.2 / kf)
        }
    };
    Ok(EvalSummary { accuracy, f_score, precision, recall, recon_rel: None, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{gaussian, rng};
    use proptest::prelude::*;

    #[test]
    fn recon_examples() {
        let mut g = rng(1);
        let w = gaussian(&mut g, 4, 2, 1.0);
        let h = gaussian(&mut g, 2, 5, 1.0);
        let x = w.matmul(&h);
        assert_eq!(relative_recon(&x, &w, &h).unwrap(), 0.0);
        assert_eq!(relative_recon(&x, &DenseMatrix::zeros(4, 2), &h).unwrap(), 1.0);
        assert!(relative_recon(&DenseMatrix::zeros(4, 5), &w, &h).is_err());
        assert!(relative_recon(&x, &w, &DenseMatrix::zeros(3, 5)).is_err());
    }

    #[test]
    fn recon_matches_scalar_loop() {
        let mut g = rng(2);
        let (x, w, h) = (gaussian(&mut g, 5, 7, 1.0), gaussian(&mut g, 5, 3, 1.0), gaussian(&mut g, 3, 7, 1.0));
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..5 {
            for j in 0..7 {
                let wh: f64 = (0..3).map(|l| w.get(i, l) * h.get(l, j)).sum();
                num += (x.get(i, j) - wh).powi(2);
                den += x.get(i, j).powi(2);
            }
        }
        assert!((relative_recon(&x, &w, &h).unwrap() - num / den).abs() <= 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 1, 0, 1];
        let s = classification_metrics(&y, &y, Some(1)).unwrap();
        assert_eq!((s.accuracy, s.f_score), (1.0, 1.0));
    }

    #[test]
    fn all_negative_predictions_score_zero() {
        let truth = [0, 0, 0, 0, 1];
        let s = classification_metrics(&[0; 5], &truth, Some(1)).unwrap();
        assert_eq!(s.f_score, 0.0);
        assert_eq!(s.accuracy, 0.8);
    }

    #[test]
    fn hand_computed_confusion() {
        // TP=3, FP=1, FN=2, TN=4.
        let truth = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
        let pred = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let s = classification_metrics(&pred, &truth, Some(1)).unwrap();
        assert_eq!(s.precision, 0.75);
        assert_eq!(s.recall, 0.6);
        assert_eq!(s.f_score, 2.0 * 0.75 * 0.6 / 1.35);
        assert!((s.f_score - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.accuracy, 0.7);
        assert_eq!(s.confusion, vec![vec![4, 1], vec![2, 3]]);
    }

    #[test]
    fn macro_average_for_multiclass() {
        let truth = [0, 1, 2, 2];
        let pred = [0, 2, 2, 2];
        let s = classification_metrics(&pred, &truth, None).unwrap();
        // Class F-scores: 1, 0, 0.8.
        assert!((s.f_score - 1.8 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(classification_metrics(&[0, 1], &[0], Some(1)).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_shared_permutation(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..40),
            shift in 0usize..40,
        ) {
            let (pred, truth): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let n = pred.len();
            let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
            let mut seen = perm.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assume!(seen.len() == n);
            let pp: Vec<_> = perm.iter().map(|&i| pred[i]).collect();
            let tp: Vec<_> = perm.iter().map(|&i| truth[i]).collect();
            let a = classification_metrics(&pred, &truth, Some(1)).unwrap();
            let b = classification_metrics(&pp, &tp, Some(1)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.accuracy + a.error_rate(), 1.0);
            let total: usize = a.confusion.iter().flatten().sum();
            prop_assert_eq!(total, n);
        }
    }
}
