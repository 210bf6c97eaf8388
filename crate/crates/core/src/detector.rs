//! Simulated scenario recognizers.
//!
//! A detector maps one view's object vector to per-scenario scores in
//! `[0, 1]`. The truth for a view is its own encoding against the binarized
//! dictionary, so scenarios only visible from some views are scored per view.
//! Any external recognizer can stand in by implementing [`ScenarioDetector`].

use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Corpus, Scene};
use crate::harness::metrics::average_precision;
use crate::pbmf::{
    binarize, solve_partial_weighted, DetectorProvider, Fixed, IdfWeights, PbmfConfig,
    ScenarioDictionary,
};
use crate::rng::rng_from;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("dictionary has no scenarios")]
    EmptyDictionary,
    #[error("invalid detector spec: {0}")]
    Spec(String),
    #[error("view has {found} objects, dictionary expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("encoding view failed: {0}")]
    Encoding(String),
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// Per-view scenario scores, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScores(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    Oracle,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSpec {
    pub mode: DetectorMode,
    /// Standard deviation of the logit-space noise.
    pub noise_sigma: f64,
    /// Probability a truth bit is inverted before scoring.
    pub flip_rate: f64,
    pub seed: u64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            mode: DetectorMode::Noisy,
            noise_sigma: 1.0,
            flip_rate: 0.05,
            seed: 0,
        }
    }
}

impl DetectorSpec {
    pub fn oracle() -> Self {
        Self {
            mode: DetectorMode::Oracle,
            noise_sigma: 0.0,
            flip_rate: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(DetectorError::Spec(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..0.5).contains(&self.flip_rate) {
            return Err(DetectorError::Spec(format!(
                "flip_rate must lie in [0, 0.5), got {}",
                self.flip_rate
            )));
        }
        Ok(())
    }
}

/// Stable identifier of a view, used to seed its noise.
pub fn view_key(scene_id: usize, view_index: usize) -> u64 {
    ((scene_id as u64) << 16) | view_index as u64
}

/// Anything that scores a single view. `key` identifies the view so that
/// stochastic detectors are reproducible.
pub trait ScenarioDetector: Send + Sync {
    fn num_scenarios(&self) -> usize;
    fn score_view(&self, presence: &[f64], key: u64) -> Result<ScenarioScores>;

    /// Scores every column of `views` (objects x views); column `j` uses key `j`.
    fn score_matrix(&self, views: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.num_scenarios(), views.ncols()));
        for (j, col) in views.axis_iter(Axis(1)).enumerate() {
            let s = self.score_view(&col.to_vec(), j as u64)?;
            out.column_mut(j).assign(&ndarray::ArrayView1::from(&s.0));
        }
        Ok(out)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Applies the flip and logit noise of `spec` to truth bits.
fn corrupt(bits: &[bool], spec: &DetectorSpec, key: u64) -> Vec<f64> {
    if spec.mode == DetectorMode::Oracle {
        return bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    }
    let mut rng = rng_from(spec.seed, &[0xde7, key]);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("sigma validated");
    let (hi, lo) = (logit(0.9), logit(0.1));
    bits.iter()
        .map(|&b| {
            let flip = rng.random::<f64>() < spec.flip_rate;
            let eps = noise.sample(&mut rng);
            let bit = b != flip;
            if spec.noise_sigma == 0.0 && spec.flip_rate == 0.0 {
                return if bit { 1.0 } else { 0.0 };
            }
            logistic(if bit { hi } else { lo } + eps)
        })
        .collect()
}

/// Simulated recognizer built from a binarized dictionary.
#[derive(Debug)]
pub struct Detector {
    dictionary: ScenarioDictionary,
    spec: DetectorSpec,
    reference: Option<IdfWeights>,
    encoding: PbmfConfig,
    cache: Mutex<HashMap<Vec<u8>, Vec<bool>>>,
}

/// With zero noise the noisy detector reproduces the oracle's bits exactly.
pub fn make_detector(dictionary: &ScenarioDictionary, spec: &DetectorSpec) -> Result<Detector> {
    spec.validate()?;
    if dictionary.num_scenarios() == 0 {
        return Err(DetectorError::EmptyDictionary);
    }
    Ok(Detector {
        dictionary: dictionary.binarized(),
        spec: spec.clone(),
        reference: None,
        encoding: PbmfConfig {
            max_iters: 200,
            ..PbmfConfig::default()
        },
        cache: Mutex::new(HashMap::new()),
    })
}

impl Detector {
    /// Weights each view's cells with IDF counts from a reference matrix
    /// instead of uniform counts.
    pub fn with_reference(mut self, reference: IdfWeights) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_encoding(mut self, config: PbmfConfig) -> Self {
        self.encoding = config;
        self
    }

    pub fn dictionary(&self) -> &ScenarioDictionary {
        &self.dictionary
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    /// Binarized encoding of one view against the dictionary.
    pub fn truth_bits(&self, presence: &[f64]) -> Result<Vec<bool>> {
        let m = self.dictionary.num_objects();
        if presence.len() != m {
            return Err(DetectorError::Dimension {
                expected: m,
                found: presence.len(),
            });
        }
        let key: Vec<u8> = presence.iter().map(|&v| u8::from(v > 0.0)).collect();
        if let Some(bits) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(bits.clone());
        }
        let a = Array2::from_shape_vec((m, 1), presence.to_vec()).expect("column shape");
        let weights = match &self.reference {
            Some(r) => r.weights_for(presence),
            None => presence.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.5 }).collect(),
        };
        let omega = Array2::from_shape_vec((m, 1), weights).expect("column shape");
        let fit = solve_partial_weighted(&a, &omega, Fixed::W(&self.dictionary.w), &self.encoding)
            .map_err(|e| DetectorError::Encoding(e.to_string()))?;
        let bits: Vec<bool> = binarize(&fit.h).iter().map(|&v| v > 0.0).collect();
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, bits.clone());
        Ok(bits)
    }

    /// Truth bits for every column of `views`, scenarios x views.
    pub fn truth_matrix(&self, views: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.num_scenarios(), views.ncols()));
        for (j, col) in views.axis_iter(Axis(1)).enumerate() {
            for (i, b) in self.truth_bits(&col.to_vec())?.into_iter().enumerate() {
                out[[i, j]] = if b { 1.0 } else { 0.0 };
            }
        }
        Ok(out)
    }
}

impl ScenarioDetector for Detector {
    fn num_scenarios(&self) -> usize {
        self.dictionary.num_scenarios()
    }

    fn score_view(&self, presence: &[f64], key: u64) -> Result<ScenarioScores> {
        let bits = self.truth_bits(presence)?;
        Ok(ScenarioScores(corrupt(&bits, &self.spec, key)))
    }
}

/// Scores every view of a scene in ring order, keyed by [`view_key`].
pub fn score_scene(detector: &dyn ScenarioDetector, scene: &Scene) -> Result<Vec<ScenarioScores>> {
    scene
        .views
        .iter()
        .map(|v| {
            let presence: Vec<f64> = v.object_presence.iter().map(|&p| f64::from(p)).collect();
            detector.score_view(&presence, view_key(scene.scene_id, v.view_index))
        })
        .collect()
}

/// Per-object recognizer: the same flip and logit noise applied directly
/// to object presence bits.
#[derive(Debug, Clone)]
pub struct ObjectDetector {
    pub spec: DetectorSpec,
}

impl ObjectDetector {
    pub fn new(spec: &DetectorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec: spec.clone() })
    }

    pub fn score_view(&self, presence: &[f64], key: u64) -> Vec<f64> {
        let bits: Vec<bool> = presence.iter().map(|&v| v > 0.0).collect();
        corrupt(&bits, &self.spec, key)
    }
}

/// Builds a fresh [`Detector`] for each dictionary handed out by the
/// refinement loop; column `j` of the view matrix uses key `j`.
#[derive(Debug, Clone)]
pub struct SimulatedProvider {
    pub spec: DetectorSpec,
    pub reference: Option<IdfWeights>,
}

impl DetectorProvider for SimulatedProvider {
    fn predict(
        &self,
        dictionary: &ScenarioDictionary,
        views: &Array2<f64>,
    ) -> std::result::Result<Array2<f64>, String> {
        let mut det = make_detector(dictionary, &self.spec).map_err(|e| e.to_string())?;
        if let Some(r) = &self.reference {
            det = det.with_reference(r.clone());
        }
        det.score_matrix(views).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    /// `None` for scenarios with no positive view.
    pub ap: Vec<Option<f64>>,
    pub positives: Vec<usize>,
    pub mean_ap: Option<f64>,
    /// Scenarios excluded from the mean for lack of positives.
    pub undefined: usize,
}

/// Average precision of each scenario over all views of `corpus`, against
/// `truth` (scenarios x views in corpus order).
pub fn evaluate_detector(
    detector: &dyn ScenarioDetector,
    corpus: &Corpus,
    truth: &Array2<f64>,
) -> Result<DetectorReport> {
    let k = detector.num_scenarios();
    let n = corpus.num_views();
    if truth.dim() != (k, n) {
        return Err(DetectorError::Spec(format!(
            "truth is {:?}, expected ({k}, {n})",
            truth.dim()
        )));
    }
    let mut scores = Array2::zeros((k, n));
    let mut col = 0;
    for scene in &corpus.scenes {
        for v in &scene.views {
            let presence: Vec<f64> = v.object_presence.iter().map(|&b| f64::from(b)).collect();
            let s = detector.score_view(&presence, view_key(scene.scene_id, v.view_index))?;
            scores.column_mut(col).assign(&ndarray::ArrayView1::from(&s.0));
            col += 1;
        }
    }
    let mut ap = Vec::with_capacity(k);
    let mut positives = Vec::with_capacity(k);
    for j in 0..k {
        let labels: Vec<bool> = truth.row(j).iter().map(|&t| t >= 0.5).collect();
        positives.push(labels.iter().filter(|&&l| l).count());
        ap.push(average_precision(&scores.row(j).to_vec(), &labels));
    }
    let defined: Vec<f64> = ap.iter().flatten().copied().collect();
    let mean_ap = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    Ok(DetectorReport {
        undefined: k - defined.len(),
        ap,
        positives,
        mean_ap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbmf::Provenance;

    fn disjoint_dict() -> ScenarioDictionary {
        let mut w = Array2::zeros((9, 3));
        for j in 0..3 {
            for i in 0..3 {
                w[[3 * j + i, j]] = 1.0;
            }
        }
        let names = (0..9).map(|i| format!("o{i}")).collect();
        ScenarioDictionary::new(w, names, Provenance::Initial)
    }

    fn view(objs: &[usize]) -> Vec<f64> {
        let mut v = vec![0.0; 9];
        for &o in objs {
            v[o] = 1.0;
        }
        v
    }

    #[test]
    fn oracle_bits() {
        let d = make_detector(&disjoint_dict(), &DetectorSpec::oracle()).unwrap();
        let s = d.score_view(&view(&[0, 1, 2, 6, 7, 8]), 0).unwrap();
        assert_eq!(s.0, vec![1.0, 0.0, 1.0]);
        let s = d.score_view(&view(&[]), 1).unwrap();
        assert_eq!(s.0, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_noise_equals_oracle() {
        let spec = DetectorSpec {
            mode: DetectorMode::Noisy,
            noise_sigma: 0.0,
            flip_rate: 0.0,
            seed: 3,
        };
        let noisy = make_detector(&disjoint_dict(), &spec).unwrap();
        let oracle = make_detector(&disjoint_dict(), &DetectorSpec::oracle()).unwrap();
        for (key, objs) in [&[0usize, 1, 2][..], &[3, 4, 5, 6], &[8]].iter().enumerate() {
            let v = view(objs);
            assert_eq!(
                noisy.score_view(&v, key as u64).unwrap(),
                oracle.score_view(&v, key as u64).unwrap()
            );
        }
    }

    #[test]
    fn noisy_scores_deterministic_and_bounded() {
        let spec = DetectorSpec {
            noise_sigma: 3.0,
            flip_rate: 0.3,
            ..DetectorSpec::default()
        };
        let d = make_detector(&disjoint_dict(), &spec).unwrap();
        let v = view(&[0, 1, 2]);
        for key in 0..50 {
            let a = d.score_view(&v, key).unwrap();
            assert_eq!(a, d.score_view(&v, key).unwrap());
            assert!(a.0.iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn invalid_settings_are_errors() {
        let dict = disjoint_dict();
        for (sigma, flip) in [(-1.0, 0.0), (0.0, 0.5), (f64::NAN, 0.1)] {
            let spec = DetectorSpec {
                noise_sigma: sigma,
                flip_rate: flip,
                ..DetectorSpec::default()
            };
            assert!(matches!(make_detector(&dict, &spec), Err(DetectorError::Spec(_))));
        }
        let empty = dict.select(&[]);
        assert!(matches!(
            make_detector(&empty, &DetectorSpec::oracle()),
            Err(DetectorError::EmptyDictionary)
        ));
    }
}
