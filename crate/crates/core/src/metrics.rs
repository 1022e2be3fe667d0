//! Evaluation metrics over a 3x3 confusion matrix (rows true, columns predicted).

use serde::{Deserialize, Serialize};

use crate::corpus::Leaning;
use crate::error::{Error, Result};
use crate::fusion::NUM_CLASSES;

pub type Confusion = [[u64; NUM_CLASSES]; NUM_CLASSES];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub macro_f1: f64,
    pub mae: f64,
    pub confusion: Confusion,
    pub n_test: u64,
}

pub fn confusion_from_pairs(pairs: impl IntoIterator<Item = (Leaning, Leaning)>) -> Confusion {
    let mut c = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (truth, pred) in pairs {
        c[truth.code()][pred.code()] += 1;
    }
    c
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        let n: u64 = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::EmptyTestSet);
        }
        let mut correct = 0;
        let mut abs_err = 0;
        let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
        for c in 0..NUM_CLASSES {
            correct += confusion[c][c];
            let predicted: u64 = (0..NUM_CLASSES).map(|t| confusion[t][c]).sum();
            let actual: u64 = confusion[c].iter().sum();
            let p = ratio(confusion[c][c], predicted);
            let r = ratio(confusion[c][c], actual);
            p_sum += p;
            r_sum += r;
            f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            for (pred, &count) in confusion[c].iter().enumerate() {
                abs_err += count * c.abs_diff(pred) as u64;
            }
        }
        let k = NUM_CLASSES as f64;
        Ok(MetricsReport {
            accuracy: ratio(correct, n),
            precision: p_sum / k,
            recall: r_sum / k,
            macro_f1: f_sum / k,
            mae: ratio(abs_err, n),
            confusion,
            n_test: n,
        })
    }

    pub fn from_predictions(pairs: impl IntoIterator<Item = (Leaning, Leaning)>) -> Result<Self> {
        Self::from_confusion(confusion_from_pairs(pairs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let r = MetricsReport::from_confusion([[3, 0, 0], [0, 2, 0], [0, 0, 5]]).unwrap();
        assert_eq!((r.accuracy, r.macro_f1, r.mae), (1.0, 1.0, 0.0));
        assert_eq!(r.n_test, 10);
    }

    #[test]
    fn hand_computed_matrix() {
        let r = MetricsReport::from_confusion([[2, 1, 0], [0, 3, 0], [1, 0, 3]]).unwrap();
        assert!((r.accuracy - 0.8).abs() < 1e-15);
        assert!((r.mae - 0.3).abs() < 1e-15);
        let p = [2.0 / 3.0, 3.0 / 4.0, 1.0];
        let rc = [2.0 / 3.0, 1.0, 3.0 / 4.0];
        let f: Vec<f64> = (0..3).map(|i| 2.0 * p[i] * rc[i] / (p[i] + rc[i])).collect();
        assert!((r.precision - p.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        assert!((r.recall - rc.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        assert!((r.macro_f1 - f.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_left_predictor() {
        let r = MetricsReport::from_confusion([[5, 0, 0], [5, 0, 0], [5, 0, 0]]).unwrap();
        assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.macro_f1 - 1.0 / 6.0).abs() < 1e-12);
        assert!(r.precision.is_finite() && r.recall.is_finite());
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(MetricsReport::from_confusion([[0; 3]; 3]), Err(Error::EmptyTestSet)));
    }

    #[test]
    fn from_pairs() {
        use Leaning::*;
        let r = MetricsReport::from_predictions([(Left, Right), (Right, Right)]).unwrap();
        assert_eq!(r.confusion[0][2], 1);
        assert_eq!(r.mae, 1.0);
    }
}
