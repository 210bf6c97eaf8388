//! Experiment drivers. Every driver is a pure function of the config:
//! trial `t` draws all of its randomness from `derive_seed(config.seed, [t])`.

use ndarray::Array2;
use rand::Rng as _;

use super::config::{ClassifierChoice, ExperimentConfig};
use super::metrics::{compute_metrics, mean_std, MetricsFragment, Prediction};
use super::pipeline::{
    build_detector, decide, fit_open_set, fuse_all, learn_dictionary, load_corpus,
    presence_matrix, reference_weights, score_scenes, subset_training_set, to_matrix,
    ClassPartition,
};
use super::report::{fmt_f64, fmt_opt, CsvTable};
use super::{HarnessError, Result};
use crate::agent::{run_episode, train_policy, QConfig, RewardSpec, SceneEpisode, TrainingScene};
use crate::dataset::{split_corpus, Corpus, CorpusSplit, Scene, SplitSpec};
use crate::detector::{view_key, DetectorSpec, ObjectDetector, ScenarioScores};
use crate::openset::{fit_logistic, fit_wsvm, wsvm_decide, LogisticModel};
use crate::pbmf::{
    dynamic_extend, pbmf_fit, prune_scenarios, reconstruction_error, solve_partial_weighted, Fixed,
    PbmfConfig, Provenance, ScenarioDictionary,
};
use crate::rng::{derive_seed, rng_from};

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(cfg.seed, &[trial as u64])
}

fn split_for(cfg: &ExperimentConfig, corpus: &Corpus, seed: u64) -> Result<CorpusSplit> {
    let split = SplitSpec {
        seed: derive_seed(seed, &[0x5]),
        ..cfg.split
    };
    Ok(split_corpus(corpus, &split)?)
}

fn pbmf_for(cfg: &ExperimentConfig, seed: u64) -> PbmfConfig {
    PbmfConfig {
        seed: derive_seed(seed, &[0x9b]),
        ..cfg.pbmf.clone()
    }
}

fn detector_for(spec: &DetectorSpec, seed: u64, tag: u64) -> DetectorSpec {
    DetectorSpec {
        seed: derive_seed(seed, &[tag]),
        ..spec.clone()
    }
}

fn accuracy(predictions: &[Prediction], truth: &[usize]) -> f64 {
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| **p == Some(**t))
        .count();
    hits as f64 / truth.len().max(1) as f64
}

fn argmax_first(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn presence(view: &crate::dataset::ViewObservation) -> Vec<f64> {
    view.object_presence.iter().map(|&p| f64::from(p)).collect()
}

/// Aggregate rows: mean and sample standard deviation of each numeric column.
fn push_aggregate(table: &mut CsvTable, key: &str, columns: &[Vec<f64>]) {
    let stats: Vec<(f64, f64)> = columns.iter().map(|c| mean_std(c)).collect();
    let mut mean = vec!["mean".to_string(), key.to_string()];
    let mut std = vec!["std".to_string(), key.to_string()];
    for (m, s) in stats {
        mean.push(fmt_f64(m));
        std.push(fmt_f64(s));
    }
    table.push(mean);
    table.push(std);
}

// ---------------------------------------------------------------------------
// Closed set

pub const GT_OBJECTS: &str = "gt_objects+logistic";
pub const PRED_OBJECTS: &str = "pred_objects+logistic";
pub const GT_SCENARIOS: &str = "gt_scenarios+logistic";
pub const PRED_SCENARIOS: &str = "pred_scenarios+logistic";
pub const PRED_SCENARIOS_WSVM: &str = "pred_scenarios+wsvm";

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedRow {
    pub trial: usize,
    pub method: &'static str,
    pub single_view_accuracy: f64,
    pub all_view_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosedSetReport {
    pub rows: Vec<ClosedRow>,
}

impl ClosedSetReport {
    pub fn method(&self, method: &str) -> Vec<&ClosedRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["trial", "method", "single_view_accuracy", "all_view_accuracy"]);
        for r in &self.rows {
            t.push(vec![
                r.trial.to_string(),
                r.method.to_string(),
                fmt_f64(r.single_view_accuracy),
                fmt_f64(r.all_view_accuracy),
            ]);
        }
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        for m in methods {
            let rows = self.method(m);
            let single: Vec<f64> = rows.iter().map(|r| r.single_view_accuracy).collect();
            let all: Vec<f64> = rows.iter().map(|r| r.all_view_accuracy).collect();
            push_aggregate(&mut t, m, &[single, all]);
        }
        t
    }
}

/// Object-feature baseline: per-view logistic regression; the scene label is
/// the class holding the largest probability over all views.
fn object_row(
    train: &[Vec<f64>],
    train_labels: &[usize],
    test_scenes: &[Vec<Vec<f64>>],
    test_labels: &[usize],
    cfg: &ExperimentConfig,
) -> Result<(f64, f64)> {
    let model = fit_logistic(&to_matrix(train), train_labels, &cfg.logistic)?;
    let mut single = Vec::new();
    let mut single_truth = Vec::new();
    let mut all = Vec::new();
    for (views, &label) in test_scenes.iter().zip(test_labels) {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for v in views {
            let p = model.predict_proba(v);
            let c = argmax_first(&p);
            single.push(Some(c));
            single_truth.push(label);
            if p[c] > best.0 {
                best = (p[c], c);
            }
        }
        all.push(Some(best.1));
    }
    Ok((accuracy(&single, &single_truth), accuracy(&all, test_labels)))
}

fn logistic_scenario_row(
    model: &LogisticModel,
    test: &[Vec<ScenarioScores>],
    labels: &[usize],
) -> Result<(f64, f64)> {
    let (mut single, mut truth) = (Vec::new(), Vec::new());
    for (views, &l) in test.iter().zip(labels) {
        for v in views {
            single.push(Some(model.predict(&v.0)));
            truth.push(l);
        }
    }
    let all: Vec<Prediction> = fuse_all(test)?.iter().map(|x| Some(model.predict(x))).collect();
    Ok((accuracy(&single, &truth), accuracy(&all, labels)))
}

/// Single-view and all-view accuracy of object and scenario features.
pub fn run_closed_set(cfg: &ExperimentConfig) -> Result<ClosedSetReport> {
    cfg.validate()?;
    let mut report = ClosedSetReport::default();
    for trial in 0..cfg.trials {
        let ts = trial_seed(cfg, trial);
        let corpus = load_corpus(cfg, ts)?;
        let split = split_for(cfg, &corpus, ts)?;
        let train: Vec<&Scene> = split.train.scenes.iter().collect();
        let test: Vec<&Scene> = split.test.scenes.iter().collect();
        let train_labels: Vec<usize> = train.iter().map(|s| s.class_label).collect();
        let test_labels: Vec<usize> = test.iter().map(|s| s.class_label).collect();
        let view_labels = split.train.view_labels();
        let mut push = |method, (single, all): (f64, f64)| {
            report.rows.push(ClosedRow {
                trial,
                method,
                single_view_accuracy: single,
                all_view_accuracy: all,
            })
        };

        // Objects.
        let gt_train: Vec<Vec<f64>> = train.iter().flat_map(|s| s.views.iter().map(presence)).collect();
        let gt_test: Vec<Vec<Vec<f64>>> =
            test.iter().map(|s| s.views.iter().map(presence).collect()).collect();
        push(GT_OBJECTS, object_row(&gt_train, &view_labels, &gt_test, &test_labels, cfg)?);

        let od = ObjectDetector::new(&detector_for(&cfg.object_detector, ts, 0x0b))?;
        let noisy = |s: &Scene| -> Vec<Vec<f64>> {
            s.views
                .iter()
                .map(|v| od.score_view(&presence(v), view_key(s.scene_id, v.view_index)))
                .collect()
        };
        let pred_train: Vec<Vec<f64>> = train.iter().flat_map(|s| noisy(s)).collect();
        let pred_test: Vec<Vec<Vec<f64>>> = test.iter().map(|s| noisy(s)).collect();
        push(PRED_OBJECTS, object_row(&pred_train, &view_labels, &pred_test, &test_labels, cfg)?);

        // Scenarios.
        let a = split.train.view_matrix();
        let dictionary = learn_dictionary(&a, &corpus.object_vocabulary, &pbmf_for(cfg, ts))?;
        let reference = reference_weights(&a);
        let spc = cfg.open_set.samples_per_scene;
        let oracle = build_detector(&dictionary, &DetectorSpec::oracle(), &reference)?;
        let predicted = build_detector(&dictionary, &detector_for(&cfg.detector, ts, 0xde), &reference)?;
        for (name, det) in [(GT_SCENARIOS, &oracle), (PRED_SCENARIOS, &predicted)] {
            let tr = score_scenes(det, &train)?;
            let te = score_scenes(det, &test)?;
            let mut rng = rng_from(ts, &[0x5c]);
            let (x, y) = subset_training_set(&tr, &train_labels, spc, &mut rng)?;
            let model = fit_logistic(&x, &y, &cfg.logistic)?;
            push(name, logistic_scenario_row(&model, &te, &test_labels)?);
            if name == PRED_SCENARIOS && cfg.classifier == ClassifierChoice::Wsvm {
                let wsvm = fit_wsvm(&x, &y, &corpus.class_names, &cfg.wsvm)?;
                let (mut single, mut truth) = (Vec::new(), Vec::new());
                for (views, &l) in te.iter().zip(&test_labels) {
                    for v in views {
                        single.push(wsvm_decide(&wsvm, &v.0).class());
                        truth.push(l);
                    }
                }
                let all: Vec<Prediction> =
                    fuse_all(&te)?.iter().map(|x| wsvm_decide(&wsvm, x).class()).collect();
                push(
                    PRED_SCENARIOS_WSVM,
                    (accuracy(&single, &truth), accuracy(&all, &test_labels)),
                );
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Open set

#[derive(Debug, Clone, PartialEq)]
pub struct OpenSetTrial {
    pub trial: usize,
    pub known: Vec<String>,
    pub unknown: Vec<String>,
    pub delta_o: f64,
    pub delta_r: f64,
    pub scenarios: usize,
    pub metrics: MetricsFragment,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpenSetReport {
    pub trials: Vec<OpenSetTrial>,
}

fn opt_values(xs: impl Iterator<Item = Option<f64>>) -> Vec<f64> {
    xs.flatten().collect()
}

impl OpenSetReport {
    pub fn mean_known_accuracy(&self) -> f64 {
        mean_std(&opt_values(self.trials.iter().map(|t| t.metrics.known_accuracy))).0
    }

    pub fn mean_unknown_recall(&self) -> f64 {
        mean_std(&opt_values(self.trials.iter().map(|t| t.metrics.unknown_recall))).0
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "trial",
            "classes",
            "delta_o",
            "delta_r",
            "scenarios",
            "accuracy",
            "known_accuracy",
            "unknown_precision",
            "unknown_recall",
            "unknown_auprc",
        ]);
        for r in &self.trials {
            let m = &r.metrics;
            t.push(vec![
                r.trial.to_string(),
                format!("known={} unknown={}", r.known.join(";"), r.unknown.join(";")),
                fmt_f64(r.delta_o),
                fmt_f64(r.delta_r),
                r.scenarios.to_string(),
                fmt_f64(m.accuracy),
                fmt_opt(m.known_accuracy),
                fmt_opt(m.unknown_precision),
                fmt_opt(m.unknown_recall),
                fmt_opt(m.unknown_auprc),
            ]);
        }
        let col = |f: &dyn Fn(&OpenSetTrial) -> Option<f64>| opt_values(self.trials.iter().map(f));
        push_aggregate(
            &mut t,
            "wsvm",
            &[
                col(&|r| Some(r.delta_o)),
                col(&|r| Some(r.delta_r)),
                col(&|r| Some(r.scenarios as f64)),
                col(&|r| Some(r.metrics.accuracy)),
                col(&|r| r.metrics.known_accuracy),
                col(&|r| r.metrics.unknown_precision),
                col(&|r| r.metrics.unknown_recall),
                col(&|r| r.metrics.unknown_auprc),
            ],
        );
        t
    }
}

/// Everything an open-set trial produces before evaluation.
pub struct OpenSetup {
    pub partition: ClassPartition,
    pub class_names: Vec<String>,
    pub dictionary: ScenarioDictionary,
    pub wsvm: crate::openset::WsvmModel,
    pub selection: crate::openset::ThresholdSelection,
    pub split: CorpusSplit,
    /// Scores of the split's scenes, in split order.
    pub train_scores: Vec<Vec<ScenarioScores>>,
    pub test_scores: Vec<Vec<ScenarioScores>>,
}

/// Learns the dictionary, detector and calibrated W-SVM from the known
/// classes of one trial.
pub fn prepare_open_set(cfg: &ExperimentConfig, corpus: &Corpus, trial: usize) -> Result<OpenSetup> {
    let ts = trial_seed(cfg, trial);
    let classes = corpus.class_names.len();
    if classes < 4 {
        return Err(HarnessError::TooFewClasses { needed: 4, found: classes });
    }
    let mut rng = rng_from(ts, &[0x0e]);
    let partition = ClassPartition::sample(classes, cfg.open_set.known_fraction, &mut rng);
    let split = split_for(cfg, corpus, ts)?;
    let known_train: Vec<&Scene> = split
        .train
        .scenes
        .iter()
        .filter(|s| partition.index_of(s.class_label).is_some())
        .collect();
    let known_val: Vec<&Scene> = split
        .val
        .scenes
        .iter()
        .filter(|s| partition.index_of(s.class_label).is_some())
        .collect();
    let a = presence_matrix(corpus, &known_train.iter().map(|s| (*s).clone()).collect::<Vec<_>>());
    let dictionary = learn_dictionary(&a, &corpus.object_vocabulary, &pbmf_for(cfg, ts))?;
    let detector = build_detector(&dictionary, &detector_for(&cfg.detector, ts, 0xde), &reference_weights(&a))?;

    let class_names: Vec<String> = partition.known.iter().map(|&c| corpus.class_names[c].clone()).collect();
    let label = |s: &&Scene| partition.index_of(s.class_label).expect("known scene");
    let tr = score_scenes(&detector, &known_train)?;
    let va = score_scenes(&detector, &known_val)?;
    let tl: Vec<usize> = known_train.iter().map(label).collect();
    let vl: Vec<usize> = known_val.iter().map(label).collect();
    let (wsvm, selection) = fit_open_set(cfg, &class_names, &tr, &tl, &va, &vl, &mut rng)?;

    let all_train: Vec<&Scene> = split.train.scenes.iter().collect();
    let all_test: Vec<&Scene> = split.test.scenes.iter().collect();
    let train_scores = score_scenes(&detector, &all_train)?;
    let test_scores = score_scenes(&detector, &all_test)?;
    Ok(OpenSetup {
        partition,
        class_names,
        dictionary,
        wsvm,
        selection,
        split,
        train_scores,
        test_scores,
    })
}

/// Half of the classes known per trial, W-SVM on fused features, all-view
/// evaluation over every test scene.
pub fn run_open_set_trials(cfg: &ExperimentConfig) -> Result<OpenSetReport> {
    cfg.validate()?;
    let corpus = load_corpus(cfg, cfg.seed)?;
    let mut report = OpenSetReport::default();
    for trial in 0..cfg.trials {
        let setup = prepare_open_set(cfg, &corpus, trial)?;
        let fused = fuse_all(&setup.test_scores)?;
        let mut predictions = Vec::new();
        let mut rejection = Vec::new();
        let truth: Vec<Option<usize>> = setup
            .split
            .test
            .scenes
            .iter()
            .map(|s| setup.partition.index_of(s.class_label))
            .collect();
        for x in &fused {
            let (p, r) = decide(&setup.wsvm, x);
            predictions.push(p);
            rejection.push(r);
        }
        let metrics = compute_metrics(&predictions, &truth, Some(&rejection))?;
        let names = |cs: &[usize]| cs.iter().map(|&c| corpus.class_names[c].clone()).collect();
        report.trials.push(OpenSetTrial {
            trial,
            known: names(&setup.partition.known),
            unknown: names(&setup.partition.unknown),
            delta_o: setup.selection.delta_o,
            delta_r: setup.selection.delta_r,
            scenarios: setup.dictionary.num_scenarios(),
            metrics,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Dynamic dictionary

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTrial {
    pub trial: usize,
    pub static_scenarios: usize,
    pub dynamic_scenarios: usize,
    pub static_error: f64,
    pub dynamic_error: f64,
    pub static_single: f64,
    pub static_all: f64,
    pub dynamic_single: f64,
    pub dynamic_all: f64,
}

impl DynamicTrial {
    pub fn error_ratio(&self) -> f64 {
        self.dynamic_error / self.static_error
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DynamicReport {
    pub trials: Vec<DynamicTrial>,
}

impl DynamicReport {
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "trial",
            "method",
            "scenarios",
            "reconstruction_error",
            "single_view_accuracy",
            "all_view_accuracy",
        ]);
        for r in &self.trials {
            for (m, k, e, s, a) in [
                ("static", r.static_scenarios, r.static_error, r.static_single, r.static_all),
                ("dynamic", r.dynamic_scenarios, r.dynamic_error, r.dynamic_single, r.dynamic_all),
            ] {
                t.push(vec![r.trial.to_string(), m.into(), k.to_string(), fmt_f64(e), fmt_f64(s), fmt_f64(a)]);
            }
        }
        let col = |f: &dyn Fn(&DynamicTrial) -> f64| self.trials.iter().map(f).collect::<Vec<f64>>();
        push_aggregate(
            &mut t,
            "static",
            &[
                col(&|r| r.static_scenarios as f64),
                col(&|r| r.static_error),
                col(&|r| r.static_single),
                col(&|r| r.static_all),
            ],
        );
        push_aggregate(
            &mut t,
            "dynamic",
            &[
                col(&|r| r.dynamic_scenarios as f64),
                col(&|r| r.dynamic_error),
                col(&|r| r.dynamic_single),
                col(&|r| r.dynamic_all),
            ],
        );
        t
    }
}

fn scenario_accuracies(
    dictionary: &ScenarioDictionary,
    a_train: &Array2<f64>,
    train: &[&Scene],
    test: &[&Scene],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    let det = build_detector(dictionary, &DetectorSpec::oracle(), &reference_weights(a_train))?;
    let tr = score_scenes(&det, train)?;
    let te = score_scenes(&det, test)?;
    let labels: Vec<usize> = train.iter().map(|s| s.class_label).collect();
    let mut rng = rng_from(seed, &[0x5c]);
    let (x, y) = subset_training_set(&tr, &labels, cfg.open_set.samples_per_scene, &mut rng)?;
    let model = fit_logistic(&x, &y, &cfg.logistic)?;
    let test_labels: Vec<usize> = test.iter().map(|s| s.class_label).collect();
    logistic_scenario_row(&model, &te, &test_labels)
}

/// Squared reconstruction error of the best unweighted encoding of `a`
/// by the fixed dictionary `w`, so both dictionaries are scored alike.
fn encoding_error(a: &Array2<f64>, w: &Array2<f64>, config: &PbmfConfig) -> Result<f64> {
    let ones = Array2::ones(a.dim());
    let h = solve_partial_weighted(a, &ones, Fixed::W(w), config)?.h;
    Ok(reconstruction_error(a, w, &h))
}

/// Static PBMF on every class against a dictionary grown class by class,
/// compared by reconstruction error on all training views and by
/// ground-truth-scenario classification.
pub fn run_dynamic_comparison(cfg: &ExperimentConfig) -> Result<DynamicReport> {
    cfg.validate()?;
    let corpus = load_corpus(cfg, cfg.seed)?;
    let classes = corpus.class_names.len();
    let needed = (cfg.dynamic.initial_classes + 1).max(8);
    if classes < needed {
        return Err(HarnessError::TooFewClasses { needed, found: classes });
    }
    let mut report = DynamicReport::default();
    for trial in 0..cfg.trials {
        let ts = trial_seed(cfg, trial);
        let split = split_for(cfg, &corpus, ts)?;
        let mut order: Vec<usize> = (0..classes).collect();
        {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng_from(ts, &[0xd0]));
        }
        let train: Vec<&Scene> = split.train.scenes.iter().collect();
        let test: Vec<&Scene> = split.test.scenes.iter().collect();
        let a_all = split.train.view_matrix();
        let class_matrix = |cs: &[usize]| split.train.restrict_to_classes(cs).view_matrix();
        let base = pbmf_for(cfg, ts);

        let initial = &order[..cfg.dynamic.initial_classes];
        let mut dict = learn_dictionary(
            &class_matrix(initial),
            &corpus.object_vocabulary,
            &PbmfConfig { k: cfg.dynamic.initial_k, ..base.clone() },
        )?;
        for &c in &order[cfg.dynamic.initial_classes..] {
            let ext = dynamic_extend(
                &dict,
                &class_matrix(&[c]),
                c,
                &PbmfConfig { k: cfg.dynamic.class_k, ..base.clone() },
            )?;
            dict = ext.dictionary;
        }
        let dynamic_k = dict.num_scenarios();
        let dynamic_error = encoding_error(&a_all, &dict.w, &base)?;

        let fit = pbmf_fit(&a_all, &PbmfConfig { k: dynamic_k, ..base.clone() })?;
        let (w_s, _, _) = prune_scenarios(&fit.w, &fit.h, base.prune_ratio, false)?;
        let static_error = encoding_error(&a_all, &w_s, &base)?;
        let static_dict = ScenarioDictionary::new(w_s, corpus.object_vocabulary.clone(), Provenance::Initial);

        let (static_single, static_all) = scenario_accuracies(&static_dict, &a_all, &train, &test, cfg, ts)?;
        let (dynamic_single, dynamic_all) = scenario_accuracies(&dict, &a_all, &train, &test, cfg, ts)?;
        report.trials.push(DynamicTrial {
            trial,
            static_scenarios: static_dict.num_scenarios(),
            dynamic_scenarios: dynamic_k,
            static_error,
            dynamic_error,
            static_single,
            static_all,
            dynamic_single,
            dynamic_all,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Active exploration

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRow {
    pub trial: usize,
    pub psi: f64,
    pub mean_actions: f64,
    pub known_accuracy: f64,
    pub unknown_precision: Option<f64>,
    pub unknown_recall: Option<f64>,
    /// Exact-match rate with rejections counting as correct on unknowns.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActiveReport {
    pub rows: Vec<ActiveRow>,
}

impl ActiveReport {
    pub fn for_psi(&self, psi: f64) -> Vec<&ActiveRow> {
        self.rows.iter().filter(|r| r.psi == psi).collect()
    }

    pub fn mean_actions(&self, psi: f64) -> f64 {
        mean_std(&self.for_psi(psi).iter().map(|r| r.mean_actions).collect::<Vec<_>>()).0
    }

    pub fn known_accuracy(&self, psi: f64) -> f64 {
        mean_std(&self.for_psi(psi).iter().map(|r| r.known_accuracy).collect::<Vec<_>>()).0
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "trial",
            "psi",
            "mean_actions",
            "known_accuracy",
            "unknown_precision",
            "unknown_recall",
            "accuracy",
        ]);
        let mut psis: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !psis.contains(&r.psi) {
                psis.push(r.psi);
            }
            t.push(vec![
                r.trial.to_string(),
                r.psi.to_string(),
                fmt_f64(r.mean_actions),
                fmt_f64(r.known_accuracy),
                fmt_opt(r.unknown_precision),
                fmt_opt(r.unknown_recall),
                fmt_f64(r.accuracy),
            ]);
        }
        for psi in psis {
            let rows = self.for_psi(psi);
            let col = |f: &dyn Fn(&ActiveRow) -> Option<f64>| rows.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            let aggregate = [
                col(&|r| Some(r.mean_actions)),
                col(&|r| Some(r.known_accuracy)),
                col(&|r| r.unknown_precision),
                col(&|r| r.unknown_recall),
                col(&|r| Some(r.accuracy)),
            ];
            push_aggregate(&mut t, &psi.to_string(), &aggregate);
        }
        t
    }
}

/// Training scenes for the policy: known-class training scenes plus the
/// training scenes of the pseudo-unknown classes.
fn policy_scenes(setup: &OpenSetup, pseudo_unknown: &[usize]) -> (Vec<TrainingScene>, Vec<TrainingScene>) {
    let mut known = Vec::new();
    let mut unknown = Vec::new();
    for (scene, scores) in setup.split.train.scenes.iter().zip(&setup.train_scores) {
        if let Some(idx) = setup.partition.index_of(scene.class_label) {
            known.push(TrainingScene { view_scores: scores.clone(), label: Some(idx) });
        } else if pseudo_unknown.contains(&scene.class_label) {
            unknown.push(TrainingScene { view_scores: scores.clone(), label: None });
        }
    }
    (known, unknown)
}

/// Trains one policy per ψ on each trial's open-set models and evaluates
/// it greedily on the test scenes of the known and held-back unknown classes.
pub fn run_active_trials(cfg: &ExperimentConfig) -> Result<ActiveReport> {
    cfg.validate()?;
    if cfg.agent.psi.is_empty() {
        return Err(HarnessError::Config("agent.psi lists no values".into()));
    }
    let corpus = load_corpus(cfg, cfg.seed)?;
    let mut report = ActiveReport::default();
    for trial in 0..cfg.trials {
        let ts = trial_seed(cfg, trial);
        let setup = prepare_open_set(cfg, &corpus, trial)?;
        let unknown = &setup.partition.unknown;
        let n_pseudo = ((unknown.len() as f64 * cfg.agent.pseudo_unknown_fraction).round() as usize)
            .min(unknown.len().saturating_sub(1));
        let pseudo: Vec<usize> = unknown[..n_pseudo].to_vec();
        let (known_scenes, unknown_scenes) = policy_scenes(&setup, &pseudo);

        let eval: Vec<(usize, Option<usize>)> = setup
            .split
            .test
            .scenes
            .iter()
            .enumerate()
            .filter(|(_, s)| !pseudo.contains(&s.class_label))
            .map(|(i, s)| (i, setup.partition.index_of(s.class_label)))
            .collect();
        let mut start_rng = rng_from(ts, &[0x57]);
        let starts: Vec<usize> = eval
            .iter()
            .map(|&(i, _)| start_rng.random_range(0..setup.test_scores[i].len()))
            .collect();

        for &psi in &cfg.agent.psi {
            let reward = RewardSpec { psi, ..cfg.agent.reward.clone() };
            let q = QConfig { seed: derive_seed(ts, &[0x91]), ..cfg.agent.q.clone() };
            let trained = train_policy(&known_scenes, &unknown_scenes, &setup.wsvm, &reward, &q)?;
            let mut actions = 0usize;
            let mut predictions = Vec::with_capacity(eval.len());
            let mut truth = Vec::with_capacity(eval.len());
            for (&(i, label), &start) in eval.iter().zip(&starts) {
                let episode = SceneEpisode::new(setup.test_scores[i].clone(), label, start, &setup.wsvm)?;
                let traj = run_episode(&trained.policy, episode, &setup.wsvm, &reward, true, ts)?;
                actions += traj.actions.len();
                predictions.push(traj.prediction);
                truth.push(label);
            }
            let m = compute_metrics(&predictions, &truth, None)?;
            report.rows.push(ActiveRow {
                trial,
                psi,
                mean_actions: actions as f64 / eval.len().max(1) as f64,
                known_accuracy: m.known_accuracy.unwrap_or(0.0),
                unknown_precision: m.unknown_precision,
                unknown_recall: m.unknown_recall,
                accuracy: m.accuracy,
            });
        }
    }
    Ok(report)
}
