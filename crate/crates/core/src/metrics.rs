//! Weighted F1, per-class F1, confusion matrix and domain accuracy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("{predictions} predictions but {truth} ground-truth labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("label {label} outside 1..={n_classes}")]
    LabelOutOfRange { label: u16, n_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `confusion[truth - 1][prediction - 1]`.
    pub confusion: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    pub support: Vec<u64>,
    pub weighted_f1: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_accuracy: Option<f64>,
}

impl EvalReport {
    pub fn n_classes(&self) -> usize {
        self.support.len()
    }

    pub fn evaluated(&self) -> u64 {
        self.support.iter().sum()
    }

    /// Support-proportional class weights; zero-support classes get 0.
    pub fn class_weights(&self) -> Vec<f64> {
        let total = self.evaluated() as f64;
        self.support.iter().map(|&s| s as f64 / total).collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn check_lengths(predictions: usize, truth: usize) -> Result<(), MetricsError> {
    if predictions != truth {
        return Err(MetricsError::LengthMismatch { predictions, truth });
    }
    if truth == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Support-weighted mean of per-class F1 over classes `1..=n_classes`.
///
/// A class with no support gets weight 0, so classes that never occur in the
/// ground truth do not affect the score even if they are predicted.
pub fn weighted_f1(
    predictions: &[u16],
    truth: &[u16],
    n_classes: usize,
) -> Result<EvalReport, MetricsError> {
    check_lengths(predictions.len(), truth.len())?;
    for &label in predictions.iter().chain(truth) {
        if label == 0 || label as usize > n_classes {
            return Err(MetricsError::LabelOutOfRange { label, n_classes });
        }
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[t as usize - 1][p as usize - 1] += 1;
    }
    let support: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
    let predicted: Vec<u64> = (0..n_classes)
        .map(|j| confusion.iter().map(|row| row[j]).sum())
        .collect();

    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision: Vec<f64> = (0..n_classes)
        .map(|i| ratio(confusion[i][i], predicted[i]))
        .collect();
    let recall: Vec<f64> = (0..n_classes)
        .map(|i| ratio(confusion[i][i], support[i]))
        .collect();
    let per_class_f1: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(&p, &r)| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
        .collect();

    let total = truth.len() as f64;
    let weighted_f1 = per_class_f1
        .iter()
        .zip(&support)
        .map(|(f, &s)| s as f64 / total * f)
        .sum();
    let correct: u64 = (0..n_classes).map(|i| confusion[i][i]).sum();

    Ok(EvalReport {
        confusion,
        precision,
        recall,
        per_class_f1,
        support,
        weighted_f1,
        accuracy: correct as f64 / total,
        domain_accuracy: None,
    })
}

/// Fraction of exact matches.
pub fn domain_accuracy<T: PartialEq>(predictions: &[T], truth: &[T]) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), truth.len())?;
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
