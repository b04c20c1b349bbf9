use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ece;
use crate::distill::softmax_with_temperature;
use crate::error::{Error, Result};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Percentage of `predictions` equal to `labels`.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions, {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("accuracy of no samples".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

pub fn predictions(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| argmax(&r.to_vec()))
        .collect()
}

pub fn accuracy_from_logits(logits: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    accuracy(&predictions(logits), labels)
}

/// `m[true][pred]` counts.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        m[l][p] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub run_id: String,
    pub checkpoint_epoch: usize,
    pub config_hash: String,
    /// Augmentation applied to the test view.
    pub test_view: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub ece: f64,
    pub ece_bins: usize,
    /// `None` for classes absent from the evaluated set.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub confusion: Vec<Vec<usize>>,
    pub n_samples: usize,
    pub provenance: Provenance,
}

impl EvalReport {
    pub fn from_logits(
        logits: &Array2<f64>,
        labels: &[usize],
        n_bins: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let n_classes = logits.ncols();
        if labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::InvalidArgument("label outside class range".into()));
        }
        let preds = predictions(logits);
        let acc = accuracy(&preds, labels)?;
        let mut probs = Array2::zeros(logits.dim());
        for (i, row) in logits.rows().into_iter().enumerate() {
            let p = softmax_with_temperature(&row.to_vec(), 1.0)?;
            probs.row_mut(i).assign(&ndarray::Array1::from(p));
        }
        let ece = ece(&probs, labels, n_bins)?;
        let confusion = confusion_matrix(&preds, labels, n_classes);
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| 100.0 * row[c] as f64 / n as f64)
            })
            .collect();
        Ok(Self {
            accuracy: acc,
            ece,
            ece_bins: n_bins,
            per_class_accuracy,
            confusion,
            n_samples: labels.len(),
            provenance,
        })
    }
}
