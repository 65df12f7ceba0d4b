//! Evaluation measures: concordance, F1, accuracy, and the mean diagonal of
//! a row-normalized confusion matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses;

pub use crate::losses::Ccc;

/// Same computation as [`losses::ccc`].
pub fn ccc_metric(pred: &[f64], labels: &[f64]) -> Result<Ccc> {
    losses::ccc(pred, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryCounts {
    pub fn tally(pred: &[bool], target: &[bool]) -> Result<Self> {
        if pred.len() != target.len() {
            return Err(Error::Length {
                what: "f1",
                left: pred.len(),
                right: target.len(),
            });
        }
        let mut c = Self::default();
        for (&p, &t) in pred.iter().zip(target) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> F1 {
        let p = if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let r = if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        if p + r == 0.0 {
            F1 {
                value: 0.0,
                zero_division: true,
            }
        } else {
            F1 {
                value: 2.0 * p * r / (p + r),
                zero_division: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1 {
    pub value: f64,
    /// Precision and recall were both zero (or undefined).
    pub zero_division: bool,
}

pub fn f1(pred: &[bool], target: &[bool]) -> Result<F1> {
    Ok(BinaryCounts::tally(pred, target)?.f1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Unweighted mean of per-label F1.
    #[default]
    Macro,
    /// F1 of counts pooled over labels.
    Micro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelF1 {
    pub value: f64,
    pub per_label: Vec<F1>,
}

/// F1 over `n` samples of `K` binary labels, `pred[i][k]` / `target[i][k]`.
pub fn multilabel_f1(
    pred: &[Vec<bool>],
    target: &[Vec<bool>],
    averaging: Averaging,
) -> Result<MultiLabelF1> {
    if pred.len() != target.len() {
        return Err(Error::Length {
            what: "multilabel_f1",
            left: pred.len(),
            right: target.len(),
        });
    }
    let k = target.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::Empty("multilabel_f1"));
    }
    let mut counts = vec![BinaryCounts::default(); k];
    for (p, t) in pred.iter().zip(target) {
        if p.len() != k || t.len() != k {
            return Err(Error::Length {
                what: "multilabel_f1 labels",
                left: p.len().max(t.len()),
                right: k,
            });
        }
        for (j, c) in counts.iter_mut().enumerate() {
            let one = BinaryCounts::tally(&[p[j]], &[t[j]])?;
            c.tp += one.tp;
            c.fp += one.fp;
            c.fn_ += one.fn_;
            c.tn += one.tn;
        }
    }
    let per_label: Vec<F1> = counts.iter().map(BinaryCounts::f1).collect();
    let value = match averaging {
        Averaging::Macro => per_label.iter().map(|f| f.value).sum::<f64>() / k as f64,
        Averaging::Micro => {
            let pooled = counts
                .iter()
                .fold(BinaryCounts::default(), |a, c| BinaryCounts {
                    tp: a.tp + c.tp,
                    fp: a.fp + c.fp,
                    fn_: a.fn_ + c.fn_,
                    tn: a.tn + c.tn,
                });
            pooled.f1().value
        }
    };
    Ok(MultiLabelF1 { value, per_label })
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Length {
            what: "accuracy",
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("accuracy"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(classes: usize, pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Length {
                what: "confusion matrix",
                left: pred.len(),
                right: truth.len(),
            });
        }
        let mut cm = Self::new(classes);
        for (&p, &t) in pred.iter().zip(truth) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Length {
                what: "confusion matrix counts",
                left: counts.len(),
                right: classes * classes,
            });
        }
        Ok(Self { classes, counts })
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        for idx in [truth, pred] {
            if idx >= self.classes {
                return Err(Error::IndexOutOfRange {
                    what: "confusion matrix class",
                    index: idx,
                    bound: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.counts[truth * self.classes..(truth + 1) * self.classes]
            .iter()
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanDiagonal {
    pub value: f64,
    /// Classes with no samples, left out of the mean.
    pub empty_rows: Vec<usize>,
}

/// Mean per-class recall (diagonal of the row-normalized matrix). Empty
/// rows are skipped and reported, or rejected when `strict`.
pub fn mean_diagonal(cm: &ConfusionMatrix, strict: bool) -> Result<MeanDiagonal> {
    let mut empty_rows = Vec::new();
    let mut sum = 0.0;
    let mut used = 0usize;
    for c in 0..cm.classes() {
        let total = cm.row_total(c);
        if total == 0 {
            empty_rows.push(c);
            continue;
        }
        sum += cm.get(c, c) as f64 / total as f64;
        used += 1;
    }
    if strict && !empty_rows.is_empty() {
        return Err(Error::MissingClasses(empty_rows));
    }
    if used == 0 {
        return Err(Error::Empty("mean_diagonal"));
    }
    Ok(MeanDiagonal {
        value: sum / used as f64,
        empty_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn ccc_metric_examples() {
        let x = [0.3, -0.2, 0.9, 0.1];
        assert_eq!(ccc_metric(&x, &x).unwrap().value, 1.0);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!(ccc_metric(&rev, &x).unwrap().value < 1.0);
    }

    #[test]
    fn f1_examples() {
        let t = bits(&[1, 0, 1, 1, 0]);
        assert_eq!(f1(&t, &t).unwrap().value, 1.0);

        // TP=2, FP=1, FN=1
        let p = bits(&[1, 1, 1, 0, 0]);
        let t = bits(&[1, 1, 0, 1, 0]);
        assert!((f1(&p, &t).unwrap().value - 2.0 / 3.0).abs() < 1e-15);

        let r = f1(&bits(&[0, 0, 0]), &bits(&[1, 0, 1])).unwrap();
        assert_eq!(
            r,
            F1 {
                value: 0.0,
                zero_division: true
            }
        );
    }

    #[test]
    fn macro_vs_micro() {
        let p = vec![bits(&[1, 0]), bits(&[1, 0]), bits(&[0, 1])];
        let t = vec![bits(&[1, 0]), bits(&[1, 1]), bits(&[0, 0])];
        // label 0: tp 2 -> f1 1; label 1: tp 0 fp 1 fn 1 -> 0
        let m = multilabel_f1(&p, &t, Averaging::Macro).unwrap();
        assert!((m.value - 0.5).abs() < 1e-15);
        // pooled tp 2 fp 1 fn 1 -> 2/3
        let u = multilabel_f1(&p, &t, Averaging::Micro).unwrap();
        assert!((u.value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[], &[]).unwrap_err(), Error::Empty("accuracy"));
    }

    #[test]
    fn mean_diagonal_examples() {
        let mut diag = ConfusionMatrix::new(7);
        for c in 0..7 {
            for _ in 0..=c {
                diag.record(c, c).unwrap();
            }
        }
        assert_eq!(mean_diagonal(&diag, true).unwrap().value, 1.0);

        let uniform = ConfusionMatrix::from_counts(7, vec![3; 49]).unwrap();
        assert!((mean_diagonal(&uniform, true).unwrap().value - 1.0 / 7.0).abs() < 1e-15);

        // recalls 1.0, 0.5, 0.0
        let cm = ConfusionMatrix::from_counts(3, vec![4, 0, 0, 1, 1, 0, 2, 0, 0]).unwrap();
        assert_eq!(mean_diagonal(&cm, true).unwrap().value, 0.5);
    }

    #[test]
    fn mean_diagonal_empty_rows() {
        let cm = ConfusionMatrix::from_counts(3, vec![2, 0, 0, 0, 0, 0, 0, 1, 1]).unwrap();
        let r = mean_diagonal(&cm, false).unwrap();
        assert_eq!(r.empty_rows, vec![1]);
        assert_eq!(r.value, 0.75);
        assert_eq!(
            mean_diagonal(&cm, true).unwrap_err(),
            Error::MissingClasses(vec![1])
        );
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let pred = [0, 1, 2, 2, 1, 0, 3];
        let truth = [0, 2, 2, 1, 1, 0, 0];
        let cm = ConfusionMatrix::from_predictions(4, &pred, &truth).unwrap();
        assert_eq!(
            accuracy(&pred, &truth).unwrap(),
            cm.trace() as f64 / cm.total() as f64
        );
    }
}
