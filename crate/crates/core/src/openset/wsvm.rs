use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::linear_svm::{fit_linear_svm_ovr, LinearSvmConfig, LinearSvmModel};
use super::ocsvm::{fit_ocsvm, OcSvmConfig, OcSvmModel};
use super::weibull::{fit_weibull_mle, fit_weibull_reversed, WeibullParams, MIN_WEIBULL_SAMPLES};
use super::{OpenSetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WsvmConfig {
    pub ocsvm: OcSvmConfig,
    pub svm: LinearSvmConfig,
    /// Fraction of the score tail used for each Weibull fit.
    pub tail_fraction: f64,
    pub delta_o: f64,
    pub delta_r: f64,
}

impl Default for WsvmConfig {
    fn default() -> Self {
        Self {
            ocsvm: OcSvmConfig::default(),
            svm: LinearSvmConfig::default(),
            tail_fraction: 1.0,
            delta_o: 0.0,
            delta_r: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCalibration {
    pub name: String,
    pub ocsvm: OcSvmModel,
    pub p_o: WeibullParams,
    pub p_r_plus: WeibullParams,
    pub p_r_minus: WeibullParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsvmModel {
    pub classes: Vec<ClassCalibration>,
    pub svm: LinearSvmModel,
    pub delta_o: f64,
    pub delta_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Known { class: usize, scores: Vec<f64> },
    Reject { scores: Vec<f64> },
}

impl Decision {
    /// `P_R+ · P_R− · I(P_O > δ_O)` for every class.
    pub fn scores(&self) -> &[f64] {
        match self {
            Decision::Known { scores, .. } | Decision::Reject { scores } => scores,
        }
    }

    pub fn class(&self) -> Option<usize> {
        match self {
            Decision::Known { class, .. } => Some(*class),
            Decision::Reject { .. } => None,
        }
    }
}

fn calibrate<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| OpenSetError::Calibration {
        class: name.to_string(),
        source: Box::new(e),
    })
}

pub fn fit_wsvm(
    features: &Array2<f64>,
    labels: &[usize],
    class_names: &[String],
    config: &WsvmConfig,
) -> Result<WsvmModel> {
    if class_names.len() < 2 {
        return Err(OpenSetError::TooFewClasses(class_names.len()));
    }
    for (c, name) in class_names.iter().enumerate() {
        let found = labels.iter().filter(|&&l| l == c).count();
        if found < MIN_WEIBULL_SAMPLES {
            return Err(OpenSetError::TooFewSamples {
                class: name.clone(),
                found,
                needed: MIN_WEIBULL_SAMPLES,
            });
        }
    }
    for param in [config.delta_o, config.delta_r] {
        if !(0.0..=1.0).contains(&param) {
            return Err(OpenSetError::Parameter(format!("threshold {param} outside [0, 1]")));
        }
    }
    let svm = fit_linear_svm_ovr(features, labels, class_names, &config.svm)?;
    let rows: Vec<Vec<f64>> = features.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();

    let mut classes = Vec::with_capacity(class_names.len());
    for (c, name) in class_names.iter().enumerate() {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let own = features.select(Axis(0), &idx);
        let ocsvm = calibrate(name, fit_ocsvm(&own, &config.ocsvm))?;
        let oc_scores: Vec<f64> = idx.iter().map(|&i| ocsvm.decision(&rows[i])).collect();
        let p_o = calibrate(name, fit_weibull_mle(&oc_scores, config.tail_fraction))?;

        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (i, row) in rows.iter().enumerate() {
            let s = svm.decision(c, row);
            if labels[i] == c {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        let p_r_plus = calibrate(name, fit_weibull_mle(&pos, config.tail_fraction))?;
        let p_r_minus = calibrate(name, fit_weibull_reversed(&neg, config.tail_fraction))?;
        classes.push(ClassCalibration {
            name: name.clone(),
            ocsvm,
            p_o,
            p_r_plus,
            p_r_minus,
        });
    }
    Ok(WsvmModel {
        classes,
        svm,
        delta_o: config.delta_o,
        delta_r: config.delta_r,
    })
}

/// Per-class probabilities for one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities {
    pub p_o: Vec<f64>,
    pub product: Vec<f64>,
}

impl WsvmModel {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// `P_O` and `P_R+ · P_R−` for every class.
    pub fn probabilities(&self, x: &[f64]) -> ClassProbabilities {
        let mut p_o = Vec::with_capacity(self.classes.len());
        let mut product = Vec::with_capacity(self.classes.len());
        for (c, cal) in self.classes.iter().enumerate() {
            p_o.push(cal.p_o.score_prob(cal.ocsvm.decision(x)));
            let s = self.svm.decision(c, x);
            product.push(cal.p_r_plus.score_prob(s) * cal.p_r_minus.score_prob(s));
        }
        ClassProbabilities { p_o, product }
    }

    pub fn with_thresholds(&self, delta_o: f64, delta_r: f64) -> WsvmModel {
        WsvmModel {
            delta_o,
            delta_r,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| OpenSetError::Persist(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<WsvmModel> {
        serde_json::from_str(text).map_err(|e| OpenSetError::Persist(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| OpenSetError::Persist(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<WsvmModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OpenSetError::Persist(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn decide_from(p: &ClassProbabilities, delta_o: f64, delta_r: f64) -> Decision {
    // A zero threshold disables its step, so probabilities that underflow
    // to exactly 0 never trigger a rejection in the closed-set setting.
    let open = |c: usize| delta_o <= 0.0 || p.p_o[c] > delta_o;
    let scores: Vec<f64> = (0..p.product.len())
        .map(|c| if open(c) { p.product[c] } else { 0.0 })
        .collect();
    let survivors: Vec<usize> = (0..scores.len())
        .filter(|&c| open(c) && (delta_r <= 0.0 || p.product[c] > delta_r))
        .collect();
    if survivors.is_empty() {
        return Decision::Reject { scores };
    }
    let best = survivors.iter().copied().fold(survivors[0], |b, c| {
        if p.product[c] > p.product[b] {
            c
        } else {
            b
        }
    });
    Decision::Known { class: best, scores }
}

/// Step 1 keeps classes whose `P_O` exceeds `δ_O`, step 2 those whose
/// `P_R+ · P_R−` exceeds `δ_R`; the best survivor wins, no survivor rejects.
pub fn wsvm_decide(model: &WsvmModel, x: &[f64]) -> Decision {
    decide_from(&model.probabilities(x), model.delta_o, model.delta_r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub delta_o: Vec<f64>,
    pub delta_r: Vec<f64>,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            delta_o: vec![0.0, 0.001, 0.01, 0.05, 0.1],
            delta_r: (0..=10).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSelection {
    pub delta_o: f64,
    pub delta_r: f64,
    pub known_accuracy: f64,
    pub unknown_recall: f64,
    pub harmonic_mean: f64,
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Grid search maximizing the harmonic mean of known-class accuracy and
/// unknown recall. `labels[i] = None` marks an unknown sample. The first
/// grid point reaching the maximum wins, so ties go to smaller thresholds.
pub fn calibrate_thresholds(
    model: &WsvmModel,
    features: &Array2<f64>,
    labels: &[Option<usize>],
    grid: &ThresholdGrid,
) -> Result<ThresholdSelection> {
    calibrate_thresholds_pooled(&[(model, features, labels)], grid)
}

/// [`calibrate_thresholds`] over several (model, features, labels) sets,
/// e.g. one per held-out fold, with the counts pooled across sets.
pub fn calibrate_thresholds_pooled(
    sets: &[(&WsvmModel, &Array2<f64>, &[Option<usize>])],
    grid: &ThresholdGrid,
) -> Result<ThresholdSelection> {
    let mut samples: Vec<(ClassProbabilities, Option<usize>)> = Vec::new();
    for (model, features, labels) in sets {
        if features.nrows() != labels.len() {
            return Err(OpenSetError::Dimension(format!(
                "{} samples, {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        for (r, &l) in features.axis_iter(Axis(0)).zip(labels.iter()) {
            samples.push((model.probabilities(&r.to_vec()), l));
        }
    }
    let unknowns = samples.iter().filter(|(_, l)| l.is_none()).count();
    if unknowns == 0 {
        return Err(OpenSetError::NoUnknowns);
    }
    let knowns = samples.len() - unknowns;

    let mut best: Option<ThresholdSelection> = None;
    for &delta_o in &grid.delta_o {
        for &delta_r in &grid.delta_r {
            let (mut correct, mut rejected) = (0usize, 0usize);
            for (p, label) in &samples {
                let d = decide_from(p, delta_o, delta_r);
                match (label, d.class()) {
                    (Some(y), Some(c)) if *y == c => correct += 1,
                    (None, None) => rejected += 1,
                    _ => {}
                }
            }
            let known_accuracy = if knowns > 0 {
                correct as f64 / knowns as f64
            } else {
                1.0
            };
            let unknown_recall = rejected as f64 / unknowns as f64;
            let h = harmonic(known_accuracy, unknown_recall);
            if best.as_ref().is_none_or(|b| h > b.harmonic_mean) {
                best = Some(ThresholdSelection {
                    delta_o,
                    delta_r,
                    known_accuracy,
                    unknown_recall,
                    harmonic_mean: h,
                });
            }
        }
    }
    best.ok_or_else(|| OpenSetError::Parameter("empty threshold grid".into()))
}

#[cfg(test)]
/// Index of the largest `P_R+ · P_R−` over all classes.
pub(crate) fn direct_argmax(model: &WsvmModel, x: &[f64]) -> usize {
    super::logistic::argmax(&model.probabilities(x).product)
}
