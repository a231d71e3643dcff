use serde::{Deserialize, Serialize};

use crate::error::{HyveError, Result};

/// Classification quality derived from a confusion matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Overall accuracy: correct / total.
    pub oa: f64,
    /// Mean recall over the classes present in the labels.
    pub aa: f64,
    /// Cohen's kappa.
    pub kappa: f64,
    /// Recall per class; `None` for classes absent from the labels.
    pub per_class: Vec<Option<f64>>,
    /// Classes missing from the labels, excluded from `aa`.
    pub absent_classes: Vec<usize>,
    pub total: usize,
    /// `confusion[truth][prediction]`
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn from_predictions(
        labels: &[usize],
        predictions: &[usize],
        classes: usize,
    ) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(HyveError::Dimension(format!(
                "{} labels vs {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        if labels.is_empty() {
            return Err(HyveError::Input("cannot evaluate an empty dataset".into()));
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in labels.iter().zip(predictions) {
            if t >= classes || p >= classes {
                return Err(HyveError::Input(format!(
                    "label {t} or prediction {p} out of range for {classes} classes"
                )));
            }
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let k = confusion.len();
        let total: usize = confusion.iter().flatten().sum();
        let n = total as f64;
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        let row: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<usize> = (0..k)
            .map(|j| confusion.iter().map(|r| r[j]).sum())
            .collect();
        let per_class: Vec<Option<f64>> = (0..k)
            .map(|i| (row[i] > 0).then(|| confusion[i][i] as f64 / row[i] as f64))
            .collect();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let absent_classes = (0..k).filter(|&i| row[i] == 0).collect();
        let p_o = correct as f64 / n;
        let p_e = (0..k).map(|i| row[i] as f64 * col[i] as f64).sum::<f64>() / (n * n);
        // With p_e = 1 every sample sits in one cell; agreement is then perfect.
        let kappa = if p_e < 1.0 {
            (p_o - p_e) / (1.0 - p_e)
        } else {
            1.0
        };
        Metrics {
            oa: p_o,
            aa: present.iter().sum::<f64>() / present.len() as f64,
            kappa,
            per_class,
            absent_classes,
            total,
            confusion,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let l = [0, 1, 2, 2, 1];
        let m = Metrics::from_predictions(&l, &l, 3).unwrap();
        assert_eq!((m.oa, m.aa, m.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor_has_zero_kappa() {
        let labels = [0, 1, 0, 1, 0, 1];
        let m = Metrics::from_predictions(&labels, &[1; 6], 2).unwrap();
        assert_eq!(m.kappa, 0.0);
        assert_eq!(m.oa, 0.5);
    }

    #[test]
    fn absent_class_is_flagged() {
        let m = Metrics::from_predictions(&[0, 0, 2], &[0, 2, 2], 3).unwrap();
        assert_eq!(m.absent_classes, vec![1]);
        assert_eq!(m.per_class[1], None);
        assert!((m.aa - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Metrics::from_predictions(&[], &[], 2).is_err());
        assert!(Metrics::from_predictions(&[0], &[3], 2).is_err());
        assert!(Metrics::from_predictions(&[0, 1], &[0], 2).is_err());
    }
}
