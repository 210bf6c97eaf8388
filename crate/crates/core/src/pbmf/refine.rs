//! Pruning, thresholding and dictionary refinement against a detector.

use ndarray::{Array2, Axis};

use super::{
    compute_idf_weights, objective_terms, pbmf_fit, solve_partial, Fixed, ObjectiveBreakdown,
    PbmfConfig, PbmfError, Provenance, Result, ScenarioDictionary, ScenarioEncoding,
    BINARY_THRESHOLD,
};
use crate::openset::{fit_logistic, LogisticConfig};

/// `x >= 0.5` maps to 1, everything else to 0.
pub fn binarize(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| if v >= BINARY_THRESHOLD { 1.0 } else { 0.0 })
}

/// Drops scenario `j` when `||H[j,:]|| < ratio * max_j' ||H[j',:]||`.
/// Rows of exact zeros are dropped for any positive ratio.
pub fn prune_scenarios(
    w: &Array2<f64>,
    h: &Array2<f64>,
    ratio: f64,
    allow_empty: bool,
) -> Result<(Array2<f64>, Array2<f64>, Vec<usize>)> {
    if w.ncols() != h.nrows() {
        return Err(PbmfError::Shape(format!("W {:?} vs H {:?}", w.dim(), h.dim())));
    }
    let norms: Vec<f64> = h
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = if ratio == 0.0 {
        (0..norms.len()).collect()
    } else {
        (0..norms.len())
            .filter(|&j| norms[j] > 0.0 && norms[j] >= ratio * max)
            .collect()
    };
    if kept.is_empty() && !allow_empty {
        return Err(PbmfError::EmptyDictionary);
    }
    Ok((w.select(Axis(1), &kept), h.select(Axis(0), &kept), kept))
}

/// Anything that maps views to per-scenario scores given a binarized
/// dictionary. The trained recognizer of a real system plugs in here.
pub trait DetectorProvider {
    /// Returns scenarios x views scores in `[0, 1]` for the columns of `views`.
    fn predict(
        &self,
        dictionary: &ScenarioDictionary,
        views: &Array2<f64>,
    ) -> std::result::Result<Array2<f64>, String>;
}

#[derive(Debug, Clone)]
pub struct RefinementConfig {
    pub pbmf: PbmfConfig,
    pub max_rounds: usize,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
    pub logistic: LogisticConfig,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            pbmf: PbmfConfig::default(),
            max_rounds: 5,
            patience: 2,
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub objective: ObjectiveBreakdown,
    pub k: usize,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct RefinementResult {
    pub dictionary: ScenarioDictionary,
    pub encoding: ScenarioEncoding,
    pub best_round: usize,
    pub rounds: Vec<RoundRecord>,
    /// Raw dictionary matrix produced in each round.
    pub round_dictionaries: Vec<Array2<f64>>,
}

pub struct RefinementData<'a> {
    pub a_train: &'a Array2<f64>,
    pub train_labels: &'a [usize],
    pub a_val: &'a Array2<f64>,
    pub val_labels: &'a [usize],
    pub object_names: &'a [String],
}

fn validation_accuracy(
    round: usize,
    dict: &ScenarioDictionary,
    data: &RefinementData<'_>,
    provider: &dyn DetectorProvider,
    cfg: &RefinementConfig,
) -> Result<f64> {
    let binary = dict.binarized();
    let detect = |views: &Array2<f64>| {
        provider
            .predict(&binary, views)
            .map_err(|message| PbmfError::Detector { round, message })
    };
    let train_scores = detect(data.a_train)?;
    let val_scores = detect(data.a_val)?;
    let model = fit_logistic(&train_scores.t().to_owned(), data.train_labels, &cfg.logistic)
        .map_err(|e| PbmfError::Evaluation {
            round,
            message: e.to_string(),
        })?;
    let correct = val_scores
        .axis_iter(Axis(1))
        .zip(data.val_labels)
        .filter(|(x, &y)| model.predict(&x.to_vec()) == y)
        .count();
    Ok(correct as f64 / data.val_labels.len().max(1) as f64)
}

/// Fit, then repeatedly prune, detect, refit the dictionary against the
/// detector's scores and re-encode, keeping the round with the best
/// validation single-view accuracy.
pub fn refinement_loop(
    data: &RefinementData<'_>,
    provider: &dyn DetectorProvider,
    cfg: &RefinementConfig,
) -> Result<RefinementResult> {
    let a = data.a_train;
    let omega_sq = compute_idf_weights(a).omega.mapv(|o| o * o);
    let fit = pbmf_fit(a, &cfg.pbmf)?;
    let mut dict = ScenarioDictionary::new(fit.w, data.object_names.to_vec(), Provenance::Initial);
    let mut h = fit.h;

    let acc = validation_accuracy(0, &dict, data, provider, cfg)?;
    let mut rounds = vec![RoundRecord {
        round: 0,
        objective: fit.objective,
        k: dict.num_scenarios(),
        val_accuracy: acc,
    }];
    let mut round_dictionaries = vec![dict.w.clone()];
    let mut best = (dict.clone(), h.clone(), 0usize, acc);
    let mut stale = 0;

    for round in 1..=cfg.max_rounds {
        let (_, _, kept) = prune_scenarios(&dict.w, &h, cfg.pbmf.prune_ratio, false)?;
        let pruned = dict.select(&kept);
        let h_hat = provider
            .predict(&pruned.binarized(), a)
            .map_err(|message| PbmfError::Detector { round, message })?;
        if h_hat.dim() != (pruned.num_scenarios(), a.ncols()) {
            return Err(PbmfError::Detector {
                round,
                message: format!(
                    "detector returned {:?}, expected {:?}",
                    h_hat.dim(),
                    (pruned.num_scenarios(), a.ncols())
                ),
            });
        }
        let w_next = solve_partial(a, Fixed::H(&h_hat), &cfg.pbmf)?.w;
        h = solve_partial(a, Fixed::W(&w_next), &cfg.pbmf)?.h;
        let wh = w_next.dot(&h);
        let objective = objective_terms(a, &omega_sq, &w_next, &h, &wh, &cfg.pbmf);
        dict = ScenarioDictionary::new(w_next, data.object_names.to_vec(), Provenance::Refined(round));

        let acc = validation_accuracy(round, &dict, data, provider, cfg)?;
        rounds.push(RoundRecord {
            round,
            objective,
            k: dict.num_scenarios(),
            val_accuracy: acc,
        });
        round_dictionaries.push(dict.w.clone());
        if acc > best.3 {
            best = (dict.clone(), h.clone(), round, acc);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (dictionary, h, best_round, _) = best;
    Ok(RefinementResult {
        dictionary,
        encoding: ScenarioEncoding { h },
        best_round,
        rounds,
        round_dictionaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn prune_hand_values() {
        let w = Array2::eye(3);
        let h = array![[3.0, 0.0], [0.01, 0.0], [2.0, 0.0]];
        let (w2, h2, kept) = prune_scenarios(&w, &h, 0.1, false).unwrap();
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(w2.ncols(), 2);
        assert_eq!(h2.row(1)[0], 2.0);
        let (_, _, again) = prune_scenarios(&w2, &h2, 0.1, false).unwrap();
        assert_eq!(again, vec![0, 1]);
        let (_, _, all) = prune_scenarios(&w, &h, 0.0, false).unwrap();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn zero_rows_pruned_and_empty_is_error() {
        let w = Array2::eye(2);
        let h = array![[0.0, 0.0], [0.4, 0.1]];
        let (_, _, kept) = prune_scenarios(&w, &h, 1e-9, false).unwrap();
        assert_eq!(kept, vec![1]);
        let z = Array2::zeros((2, 2));
        assert!(matches!(prune_scenarios(&w, &z, 0.1, false), Err(PbmfError::EmptyDictionary)));
        assert!(prune_scenarios(&w, &z, 0.1, true).unwrap().2.is_empty());
    }

    #[test]
    fn binarize_boundary() {
        let h = array![[0.5, 0.49, 1.0, 0.0]];
        let b = binarize(&h);
        assert_eq!(b, array![[1.0, 0.0, 1.0, 0.0]]);
        assert_eq!(binarize(&b), b);
    }
}
