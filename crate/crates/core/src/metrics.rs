//! Confusion matrices, misclassification counts, relative absolute error,
//! weighted TP rate and the group/overall averages built from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("no predictions to score")]
    Empty,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelRange { label: usize, n_classes: usize },
    #[error("relative absolute error undefined: baseline error is zero but prediction error is {0}")]
    ZeroBaseline(f64),
    #[error("cannot average an empty list")]
    EmptyAggregate,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Misclassified count.
    pub fn ms(&self) -> u64 {
        self.total() - self.trace()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }
}

pub fn confusion(preds: &[usize], actuals: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != actuals.len() {
        return Err(MetricsError::Length(preds.len(), actuals.len()));
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &a) in preds.iter().zip(actuals) {
        for label in [p, a] {
            if label >= n_classes {
                return Err(MetricsError::LabelRange { label, n_classes });
            }
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Probabilistic relative absolute error, in percent, against a baseline that
/// always predicts `baseline` (normally the training class frequencies).
pub fn relative_absolute_error(probs: &[Vec<f64>], actuals: &[usize], baseline: &[f64]) -> Result<f64> {
    if probs.len() != actuals.len() {
        return Err(MetricsError::Length(probs.len(), actuals.len()));
    }
    if probs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n_classes = baseline.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, &a) in probs.iter().zip(actuals) {
        if a >= n_classes {
            return Err(MetricsError::LabelRange { label: a, n_classes });
        }
        if p.len() != n_classes {
            return Err(MetricsError::Length(p.len(), n_classes));
        }
        for j in 0..n_classes {
            let y = if j == a { 1.0 } else { 0.0 };
            num += (p[j] - y).abs();
            den += (baseline[j] - y).abs();
        }
    }
    if den == 0.0 {
        return if num == 0.0 {
            Ok(0.0)
        } else {
            Err(MetricsError::ZeroBaseline(num))
        };
    }
    Ok(100.0 * num / den)
}

/// Support-weighted mean of per-class TP rates; empty classes weigh nothing.
pub fn tp_rate_weighted(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total() as f64;
    if total == 0.0 {
        return 0.0;
    }
    (0..cm.n_classes())
        .map(|c| {
            let support = cm.support(c) as f64;
            if support == 0.0 {
                0.0
            } else {
                (support / total) * (cm.counts[c][c] as f64 / support)
            }
        })
        .sum()
}

/// Arithmetic mean. Used for AMS/ARAE/ATPRate over classifiers and for the
/// overall variants over datasets.
pub fn aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Score of one classifier on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScore {
    pub classifier: String,
    pub ms: u64,
    pub total: u64,
    pub rae: f64,
    pub tp_rate: f64,
    pub confusion: ConfusionMatrix,
}

impl ClassifierScore {
    pub fn new(classifier: impl Into<String>, confusion: ConfusionMatrix, rae: f64) -> Self {
        ClassifierScore {
            classifier: classifier.into(),
            ms: confusion.ms(),
            total: confusion.total(),
            rae,
            tp_rate: tp_rate_weighted(&confusion),
            confusion,
        }
    }
}

/// Classifier-group averages on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub ams: f64,
    pub arae: f64,
    pub atp_rate: f64,
}

impl DatasetScore {
    pub fn from_scores(scores: &[ClassifierScore]) -> Result<Self> {
        let ms: Vec<f64> = scores.iter().map(|s| s.ms as f64).collect();
        let rae: Vec<f64> = scores.iter().map(|s| s.rae).collect();
        let tp: Vec<f64> = scores.iter().map(|s| s.tp_rate).collect();
        Ok(DatasetScore {
            ams: aggregate(&ms)?,
            arae: aggregate(&rae)?,
            atp_rate: aggregate(&tp)?,
        })
    }
}

/// Averages of dataset scores across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteScore {
    pub oams: f64,
    pub oarae: f64,
    pub oatp_rate: f64,
}

impl SuiteScore {
    pub fn from_dataset_scores(scores: &[DatasetScore]) -> Result<Self> {
        let ams: Vec<f64> = scores.iter().map(|s| s.ams).collect();
        let arae: Vec<f64> = scores.iter().map(|s| s.arae).collect();
        let tp: Vec<f64> = scores.iter().map(|s| s.atp_rate).collect();
        Ok(SuiteScore {
            oams: aggregate(&ams)?,
            oarae: aggregate(&arae)?,
            oatp_rate: aggregate(&tp)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_basic_cases() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.ms(), 0);
        assert_eq!(cm.counts()[1], vec![0, 1, 0]);
        let cm = confusion(&[1], &[0], 2).unwrap();
        assert_eq!(cm.ms(), 1);
        assert_eq!(
            confusion(&[0, 3], &[0, 1], 2),
            Err(MetricsError::LabelRange { label: 3, n_classes: 2 })
        );
        assert_eq!(confusion(&[], &[], 2), Err(MetricsError::Empty));
    }

    #[test]
    fn binary_matrix_ms_and_tp_rate() {
        let cm = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![1, 9]]);
        assert_eq!(cm.ms(), 3);
        assert!((tp_rate_weighted(&cm) - 0.85).abs() < 1e-12);
        let diag = ConfusionMatrix::from_counts(vec![vec![4, 0], vec![0, 6]]);
        assert_eq!(tp_rate_weighted(&diag), 1.0);
    }

    #[test]
    fn tp_rate_with_empty_class() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 1, 0], vec![0, 0, 0], vec![0, 1, 5]]);
        let expected = (3.0 + 5.0) / 10.0;
        assert!((tp_rate_weighted(&cm) - expected).abs() < 1e-12);
    }

    #[test]
    fn rae_reference_cases() {
        let probs = vec![vec![0.9, 0.1], vec![0.6, 0.4]];
        let rae = relative_absolute_error(&probs, &[0, 1], &[0.5, 0.5]).unwrap();
        assert!((rae - 70.0).abs() < 1e-9);

        let perfect = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(relative_absolute_error(&perfect, &[0, 1], &[0.5, 0.5]).unwrap(), 0.0);

        let q = [0.25, 0.75];
        let prior = vec![q.to_vec(); 4];
        let rae = relative_absolute_error(&prior, &[0, 1, 1, 1], &q).unwrap();
        assert!((rae - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rae_zero_baseline() {
        let probs = vec![vec![1.0]];
        assert_eq!(relative_absolute_error(&probs, &[0], &[1.0]).unwrap(), 0.0);
        let probs = vec![vec![1.0, 0.0]];
        assert!(matches!(
            relative_absolute_error(&probs, &[0], &[1.0, 0.0]),
            Ok(x) if x == 0.0
        ));
        let probs = vec![vec![0.5, 0.5]];
        assert!(matches!(
            relative_absolute_error(&probs, &[0], &[1.0, 0.0]),
            Err(MetricsError::ZeroBaseline(_))
        ));
    }

    #[test]
    fn aggregates() {
        assert_eq!(aggregate(&[3.0, 5.0, 7.0, 2.0, 3.0]).unwrap(), 4.0);
        assert_eq!(aggregate(&[1.5]).unwrap(), 1.5);
        assert_eq!(aggregate(&[4.0, 2.5]).unwrap(), 3.25);
        assert_eq!(aggregate(&[]), Err(MetricsError::EmptyAggregate));
    }
}
