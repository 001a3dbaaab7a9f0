//! Classification metrics, accent-embedding similarity and speaker similarity.

mod report;
mod similarity;

use serde::{Deserialize, Serialize};

use crate::error::{AidError, Result};

pub use report::{render_eval_table, render_eval_tsv, ReportHeader, AVERAGING_NOTE};
pub use similarity::{
    aecs, random_pair_aecs, speaker_similarity_stats, ConvertedSample, MeanStd, SimilarityStats, SpeakerCentroids,
    SpeakerSpace,
};

/// Square count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        let mut cm = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AidError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            cm.counts[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(cm)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.n_classes..(truth + 1) * self.n_classes]
    }
}

/// Tally predictions against true labels.
pub fn confusion(predicted: &[usize], truth: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(AidError::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&p, &t) in predicted.iter().zip(truth) {
        for id in [p, t] {
            if id >= n_classes {
                return Err(AidError::LabelOutOfRange { id, classes: n_classes });
            }
        }
        cm.counts[t * n_classes + p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unweighted per-class averages; 0/0 counts as 0.
pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MacroMetrics> {
    let n = cm.n_classes();
    let total = cm.total();
    if n == 0 || total == 0 {
        return Err(AidError::Empty("confusion matrix"));
    }
    let per_class: Vec<ClassMetrics> = (0..n)
        .map(|c| {
            let tp = cm.get(c, c);
            let predicted: u64 = (0..n).map(|r| cm.get(r, c)).sum();
            let support: u64 = cm.row(c).iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    Ok(MacroMetrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        accuracy: ratio(cm.trace(), total),
        per_class,
    })
}

/// Classification results on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub metrics: MacroMetrics,
    pub confusion: ConfusionMatrix,
    pub n_utterances: usize,
    pub n_unseen_speakers: usize,
}

impl EvalReport {
    pub fn new(labels: Vec<String>, confusion: ConfusionMatrix, n_unseen_speakers: usize) -> Result<Self> {
        let metrics = macro_metrics(&confusion)?;
        Ok(EvalReport {
            labels,
            n_utterances: confusion.total() as usize,
            metrics,
            confusion,
            n_unseen_speakers,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.metrics.accuracy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_is_diagonal() {
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(cm.trace(), 4);
        assert_eq!(cm.total(), 4);
        let m = macro_metrics(&cm).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_input_gives_zero_matrix() {
        let cm = confusion(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(macro_metrics(&cm), Err(AidError::Empty(_))));
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        assert!(matches!(
            confusion(&[0, 3], &[0, 1], 3),
            Err(AidError::LabelOutOfRange { id: 3, classes: 3 })
        ));
    }

    #[test]
    fn two_class_worked_example() {
        let cm = ConfusionMatrix::from_rows(&[vec![8, 2], vec![4, 6]]).unwrap();
        let m = macro_metrics(&cm).unwrap();
        let c0 = m.per_class[0];
        let c1 = m.per_class[1];
        assert!((c0.precision - 8.0 / 12.0).abs() < 1e-12);
        assert!((c0.recall - 0.8).abs() < 1e-12);
        assert!((c0.f1 - 8.0 / 11.0).abs() < 1e-12);
        assert!((c1.precision - 0.75).abs() < 1e-12);
        assert!((c1.recall - 0.6).abs() < 1e-12);
        assert!((c1.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 0.696_969_696_969_697).abs() < 1e-12);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn absent_class_contributes_zeros() {
        let cm = ConfusionMatrix::from_rows(&[vec![5, 0, 0], vec![0, 5, 0], vec![0, 0, 0]]).unwrap();
        let m = macro_metrics(&cm).unwrap();
        assert_eq!(m.per_class[2].precision, 0.0);
        assert_eq!(m.per_class[2].recall, 0.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 1.0);
    }
}
