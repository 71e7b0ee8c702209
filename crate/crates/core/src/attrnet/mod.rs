//! Region-based multi-label attribute prediction.
//!
//! Proposals are grouped by spectral clustering of their IoU matrix, the best
//! few per cluster plus the whole canvas form the hypothesis set, a small
//! feed-forward scorer rates each hypothesis, and the per-hypothesis
//! probabilities are max-pooled into one attribute vector.

mod cluster;
mod predictor;
mod proposer;

use crate::error::{Error, Result};
use crate::microworld::RegionBox;

pub use cluster::{cluster_and_select, ncut_value, spectral_partition, HypothesisSet};
pub use predictor::{
    max_pool, predict_attributes, predict_whole, train_predictor, PredictorConfig, PredictorParams, TrainedPredictor,
};
pub use proposer::{proposal_targets, propose, ProposerConfig};

/// Intersection over union of two boxes.
pub fn iou(a: &RegionBox, b: &RegionBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Raw per-attribute scores and their sigmoid probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeScores {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl AttributeScores {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probabilities = logits.iter().map(|&s| sigmoid(s)).collect();
        AttributeScores { logits, probabilities }
    }
}

/// Per-attribute probabilities in [0, 1].
pub type AttributeVector = Vec<f64>;

/// Element-wise logistic loss over logits with {0,1} labels mapped to
/// {-1,+1}: `J = (1/N) sum_i sum_j ln(1 + exp(-y_ij s_ij))`. Returns the loss
/// and its gradient with respect to every logit.
pub fn logistic_loss(logits: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::domain(format!(
            "{} logit rows for {} label rows",
            logits.len(),
            labels.len()
        )));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (s_row, y_row) in logits.iter().zip(labels) {
        if s_row.len() != y_row.len() {
            return Err(Error::domain("logit and label widths differ"));
        }
        let mut g_row = Vec::with_capacity(s_row.len());
        for (&s, &y) in s_row.iter().zip(y_row) {
            if y != 0.0 && y != 1.0 {
                return Err(Error::domain(format!("label {y} is not binary")));
            }
            let signed = 2.0 * y - 1.0;
            let m = -signed * s;
            loss += softplus(m);
            g_row.push(-signed * sigmoid(m) / n);
        }
        grad.push(g_row);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> RegionBox {
        RegionBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&b(0., 0., 2., 2.), &b(0., 0., 2., 2.)), 1.0);
        assert_eq!(iou(&b(0., 0., 1., 1.), &b(2., 2., 3., 3.)), 0.0);
        assert!((iou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn loss_at_zero_logit_is_ln2() {
        let (l, _) = logistic_loss(&[vec![0.0]], &[vec![1.0]]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, _) = logistic_loss(&[vec![0.0]], &[vec![0.0]]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_limits() {
        let (hi, _) = logistic_loss(&[vec![50.0]], &[vec![1.0]]).unwrap();
        assert!(hi < 1e-20);
        let (lo, _) = logistic_loss(&[vec![-800.0]], &[vec![1.0]]).unwrap();
        assert!((lo - 800.0).abs() < 1e-9);
        assert!(lo.is_finite());
    }

    #[test]
    fn loss_errors() {
        assert!(logistic_loss(&[vec![0.0, 1.0]], &[vec![1.0]]).is_err());
        assert!(logistic_loss(&[vec![0.0]], &[]).is_err());
        assert!(logistic_loss(&[vec![0.0]], &[vec![0.5]]).is_err());
    }

    proptest! {
        #[test]
        fn loss_is_positive_and_decreasing_in_margin(s in -30.0f64..30.0, d in 0.01f64..5.0, y in 0u8..2) {
            let y = y as f64;
            let sign = 2.0 * y - 1.0;
            let (a, _) = logistic_loss(&[vec![s]], &[vec![y]]).unwrap();
            let (b, _) = logistic_loss(&[vec![s + sign * d]], &[vec![y]]).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!(b < a);
        }

        #[test]
        fn iou_is_symmetric_and_bounded(
            x0 in 0.0f64..50.0, y0 in 0.0f64..50.0, w in 1.0f64..50.0, h in 1.0f64..50.0,
            u0 in 0.0f64..50.0, v0 in 0.0f64..50.0, w2 in 1.0f64..50.0, h2 in 1.0f64..50.0,
        ) {
            let a = b(x0, y0, x0 + w, y0 + h);
            let c = b(u0, v0, u0 + w2, v0 + h2);
            let i = iou(&a, &c);
            prop_assert!((0.0..=1.0).contains(&i));
            prop_assert_eq!(i, iou(&c, &a));
        }
    }
}
