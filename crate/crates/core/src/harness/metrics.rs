//! Accuracy, unknown-class precision/recall and step-wise average precision.

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// A classifier's answer for one sample: a known class or a rejection.
pub type Prediction = Option<usize>;

/// Area under the precision-recall curve by step-wise summation over
/// descending score thresholds. Tied scores enter together, so a constant
/// scorer gets the positive base rate. `None` when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || scores.len() != labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += usize::from(labels[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFragment {
    pub samples: usize,
    /// Exact-match rate; a rejection matches an unknown label.
    pub accuracy: f64,
    /// Fraction of known-class samples assigned their class; `None` without knowns.
    pub known_accuracy: Option<f64>,
    pub unknown_precision: Option<f64>,
    pub unknown_recall: Option<f64>,
    pub unknown_auprc: Option<f64>,
}

/// `truth[i] = None` marks an unknown-class sample. `rejection_scores`,
/// when given, rank samples by how strongly they should be rejected.
pub fn compute_metrics(
    predictions: &[Prediction],
    truth: &[Option<usize>],
    rejection_scores: Option<&[f64]>,
) -> Result<MetricsFragment, HarnessError> {
    if predictions.is_empty() {
        return Err(HarnessError::Metrics("no predictions".into()));
    }
    if predictions.len() != truth.len() {
        return Err(HarnessError::Metrics(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    let n = predictions.len();
    let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    let knowns = truth.iter().filter(|t| t.is_some()).count();
    let known_correct = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| t.is_some() && p == t)
        .count();
    let rejects = predictions.iter().filter(|p| p.is_none()).count();
    let unknowns = n - knowns;
    let true_rejects = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.is_none() && t.is_none())
        .count();
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let unknown_auprc = match rejection_scores {
        Some(s) => {
            if s.len() != n {
                return Err(HarnessError::Metrics(format!(
                    "{} rejection scores for {n} samples",
                    s.len()
                )));
            }
            let labels: Vec<bool> = truth.iter().map(Option::is_none).collect();
            average_precision(s, &labels)
        }
        None => None,
    };
    Ok(MetricsFragment {
        samples: n,
        accuracy: correct as f64 / n as f64,
        known_accuracy: ratio(known_correct, knowns),
        unknown_precision: ratio(true_rejects, rejects),
        unknown_recall: ratio(true_rejects, unknowns),
        unknown_auprc,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1, 0.0], &[true, true, false, false]), Some(1.0));
    }

    #[test]
    fn hand_ranked_ap() {
        // ranks: P N P -> precision at hits 1 and 2/3
        let ap = average_precision(&[0.9, 0.5, 0.3], &[true, false, true]).unwrap();
        assert!((ap - (0.5 * 1.0 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn no_positives_is_undefined() {
        assert_eq!(average_precision(&[0.2, 0.4], &[false, false]), None);
    }

    #[test]
    fn hand_counted_unknown_metrics() {
        let m = compute_metrics(&[None, None, Some(0)], &[None, Some(0), Some(0)], None).unwrap();
        assert_eq!(m.unknown_precision, Some(0.5));
        assert_eq!(m.unknown_recall, Some(1.0));
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.known_accuracy, Some(0.5));
    }

    #[test]
    fn all_correct() {
        let truth = [Some(1), None, Some(0), None];
        let m = compute_metrics(&truth, &truth, None).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.unknown_recall, Some(1.0));
    }

    #[test]
    fn empty_and_mismatch() {
        assert!(compute_metrics(&[], &[], None).is_err());
        assert!(compute_metrics(&[None], &[None, None], None).is_err());
    }

    proptest! {
        #[test]
        fn constant_score_gives_base_rate(labels in prop::collection::vec(any::<bool>(), 1..60), c in 0.0f64..1.0) {
            let pos = labels.iter().filter(|&&l| l).count();
            let scores = vec![c; labels.len()];
            match average_precision(&scores, &labels) {
                None => prop_assert_eq!(pos, 0),
                Some(ap) => prop_assert!((ap - pos as f64 / labels.len() as f64).abs() < 1e-12),
            }
        }

        #[test]
        fn ap_in_unit_interval(pairs in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..80)) {
            let (s, l): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
            if let Some(ap) = average_precision(&s, &l) {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
            }
        }
    }
}
