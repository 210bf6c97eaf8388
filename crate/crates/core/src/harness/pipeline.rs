//! Building blocks shared by the experiment drivers.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use super::config::ExperimentConfig;
use super::Result;
use crate::dataset::{generate_corpus, read_corpus, Corpus, GeneratorSpec, Scene, TemplatePlan};
use crate::detector::{make_detector, score_scene, Detector, DetectorSpec, ScenarioScores, ScenarioDetector};
use crate::fusion::{fuse_subset, random_subset_features};
use crate::openset::{calibrate_thresholds_pooled, fit_wsvm, wsvm_decide, ThresholdSelection, WsvmModel};
use crate::pbmf::{
    compute_idf_weights, pbmf_fit, prune_scenarios, IdfWeights, PbmfConfig, Provenance,
    ScenarioDictionary, BINARY_THRESHOLD,
};
use crate::rng::{derive_seed, Rng};

/// Corpus for a run: read from `corpus.path`, or generated from the plan
/// with seeds derived from `seed`.
pub fn load_corpus(cfg: &ExperimentConfig, seed: u64) -> Result<Corpus> {
    if let Some(path) = &cfg.corpus.path {
        return Ok(read_corpus(path)?);
    }
    let plan = TemplatePlan {
        seed: derive_seed(seed, &[0xc0]),
        ..cfg.corpus.plan.clone()
    };
    let spec = GeneratorSpec::from_plan(
        &plan,
        cfg.corpus.scenes_per_class,
        cfg.corpus.views_per_scene,
        cfg.corpus.noise,
        derive_seed(seed, &[0xc1]),
    )?;
    Ok(generate_corpus(&spec)?)
}

/// Objects x views presence matrix of `scenes`, scene then view order.
pub fn presence_matrix(corpus: &Corpus, scenes: &[Scene]) -> Array2<f64> {
    corpus.with_scenes(scenes.to_vec()).view_matrix()
}

/// Fits, prunes weak scenarios and drops scenarios without member objects.
pub fn learn_dictionary(
    a: &Array2<f64>,
    object_names: &[String],
    config: &PbmfConfig,
) -> Result<ScenarioDictionary> {
    let fit = pbmf_fit(a, config)?;
    let (w, _, _) = prune_scenarios(&fit.w, &fit.h, config.prune_ratio, false)?;
    let nonempty: Vec<usize> = (0..w.ncols())
        .filter(|&j| w.column(j).iter().any(|&v| v >= BINARY_THRESHOLD))
        .collect();
    let w = if nonempty.is_empty() { w } else { w.select(Axis(1), &nonempty) };
    Ok(ScenarioDictionary::new(w, object_names.to_vec(), Provenance::Initial))
}

pub fn build_detector(
    dictionary: &ScenarioDictionary,
    spec: &DetectorSpec,
    reference: &IdfWeights,
) -> Result<Detector> {
    Ok(make_detector(dictionary, spec)?.with_reference(reference.clone()))
}

pub fn reference_weights(a: &Array2<f64>) -> IdfWeights {
    compute_idf_weights(a)
}

pub fn score_scenes(detector: &dyn ScenarioDetector, scenes: &[&Scene]) -> Result<Vec<Vec<ScenarioScores>>> {
    scenes
        .iter()
        .map(|s| score_scene(detector, s).map_err(Into::into))
        .collect()
}

/// Max-pooled scores over every view of each scene.
pub fn fuse_all(scores: &[Vec<ScenarioScores>]) -> Result<Vec<Vec<f64>>> {
    scores
        .iter()
        .map(|views| {
            let all: Vec<usize> = (0..views.len()).collect();
            Ok(fuse_subset(views, &all)?.scores)
        })
        .collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j])
}

/// Fused random-subset features with every scene's label repeated.
pub fn subset_training_set(
    scores: &[Vec<ScenarioScores>],
    labels: &[usize],
    samples_per_scene: usize,
    rng: &mut Rng,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let rows = random_subset_features(scores, samples_per_scene, rng)?;
    let y = labels
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, samples_per_scene))
        .collect();
    Ok((to_matrix(&rows), y))
}

/// Known and unknown classes for one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    /// Sorted corpus class indices; classifier index = position.
    pub known: Vec<usize>,
    pub unknown: Vec<usize>,
}

impl ClassPartition {
    pub fn sample(num_classes: usize, known_fraction: f64, rng: &mut Rng) -> Self {
        let mut order: Vec<usize> = (0..num_classes).collect();
        order.shuffle(rng);
        let k = ((num_classes as f64 * known_fraction).round() as usize).clamp(1, num_classes - 1);
        let mut known = order[..k].to_vec();
        let mut unknown = order[k..].to_vec();
        known.sort_unstable();
        unknown.sort_unstable();
        Self { known, unknown }
    }

    pub fn index_of(&self, class: usize) -> Option<usize> {
        self.known.iter().position(|&c| c == class)
    }
}

/// Fits a W-SVM on all known classes. Thresholds are chosen on validation
/// data with known classes held out in turn as stand-ins for unknowns:
/// each fold refits on the remaining classes, and counts are pooled.
pub fn fit_open_set(
    cfg: &ExperimentConfig,
    class_names: &[String],
    train_scores: &[Vec<ScenarioScores>],
    train_labels: &[usize],
    val_scores: &[Vec<ScenarioScores>],
    val_labels: &[usize],
    rng: &mut Rng,
) -> Result<(WsvmModel, ThresholdSelection)> {
    let classes = class_names.len();
    let per_fold = ((classes as f64 * cfg.open_set.holdout_fraction).round() as usize).min(classes - 2);
    let spc = cfg.open_set.samples_per_scene;
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(rng);
    let folds = if per_fold == 0 {
        0
    } else {
        cfg.open_set.calibration_folds.min(classes / per_fold)
    };
    let val_x = to_matrix(&fuse_all(val_scores)?);

    let mut fold_models = Vec::with_capacity(folds);
    for f in 0..folds {
        let held = &order[f * per_fold..(f + 1) * per_fold];
        let kept: Vec<usize> = (0..classes).filter(|c| !held.contains(c)).collect();
        let sub = |c: usize| kept.iter().position(|&k| k == c);
        let idx: Vec<usize> = (0..train_labels.len()).filter(|&i| sub(train_labels[i]).is_some()).collect();
        let s: Vec<Vec<ScenarioScores>> = idx.iter().map(|&i| train_scores[i].clone()).collect();
        let l: Vec<usize> = idx.iter().map(|&i| sub(train_labels[i]).expect("kept class")).collect();
        let (x, y) = subset_training_set(&s, &l, spc, rng)?;
        let names: Vec<String> = kept.iter().map(|&c| class_names[c].clone()).collect();
        let model = fit_wsvm(&x, &y, &names, &cfg.wsvm)?;
        let vl: Vec<Option<usize>> = val_labels.iter().map(|&c| sub(c)).collect();
        fold_models.push((model, vl));
    }
    let selection = if fold_models.is_empty() {
        ThresholdSelection {
            delta_o: cfg.wsvm.delta_o,
            delta_r: cfg.wsvm.delta_r,
            known_accuracy: f64::NAN,
            unknown_recall: f64::NAN,
            harmonic_mean: f64::NAN,
        }
    } else {
        let sets: Vec<(&WsvmModel, &Array2<f64>, &[Option<usize>])> =
            fold_models.iter().map(|(m, l)| (m, &val_x, l.as_slice())).collect();
        calibrate_thresholds_pooled(&sets, &cfg.open_set.grid)?
    };

    let (x, y) = subset_training_set(train_scores, train_labels, spc, rng)?;
    let model = fit_wsvm(&x, &y, class_names, &cfg.wsvm)?;
    Ok((model.with_thresholds(selection.delta_o, selection.delta_r), selection))
}

/// W-SVM answer and rejection score (`1 - max` class score) for fused features.
pub fn decide(model: &WsvmModel, fused: &[f64]) -> (Option<usize>, f64) {
    let d = wsvm_decide(model, fused);
    let max = d.scores().iter().copied().fold(0.0, f64::max);
    (d.class(), 1.0 - max)
}
