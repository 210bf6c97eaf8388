use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Result};
use crate::agent::{QConfig, RewardSpec};
use crate::dataset::{NoiseRates, SplitSpec, TemplatePlan, DEFAULT_VIEWS_PER_SCENE};
use crate::detector::{DetectorMode, DetectorSpec};
use crate::openset::{LogisticConfig, ThresholdGrid, WsvmConfig};
use crate::pbmf::PbmfConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Read a persisted corpus instead of generating one.
    pub path: Option<PathBuf>,
    pub plan: TemplatePlan,
    pub scenes_per_class: usize,
    pub views_per_scene: usize,
    pub noise: NoiseRates,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            path: None,
            plan: TemplatePlan::default(),
            scenes_per_class: 35,
            views_per_scene: DEFAULT_VIEWS_PER_SCENE,
            noise: NoiseRates::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierChoice {
    Logistic,
    Wsvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenSetConfig {
    /// Fraction of the classes treated as known in each trial.
    pub known_fraction: f64,
    /// Fraction of the known classes held out as pseudo-unknowns when
    /// calibrating the rejection thresholds.
    pub holdout_fraction: f64,
    /// Number of held-out folds pooled for threshold calibration.
    pub calibration_folds: usize,
    /// Fused random view subsets drawn per training scene.
    pub samples_per_scene: usize,
    pub grid: ThresholdGrid,
}

impl Default for OpenSetConfig {
    fn default() -> Self {
        Self {
            known_fraction: 0.5,
            holdout_fraction: 0.25,
            calibration_folds: 3,
            samples_per_scene: 8,
            grid: ThresholdGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicConfig {
    pub initial_classes: usize,
    pub initial_k: usize,
    /// Candidate scenarios learned for each added class.
    pub class_k: usize,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            initial_classes: 7,
            initial_k: 20,
            class_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub psi: Vec<f64>,
    pub q: QConfig,
    pub reward: RewardSpec,
    /// Fraction of the non-known classes whose training scenes serve as
    /// pseudo-unknowns for the policy; the rest are evaluation unknowns.
    pub pseudo_unknown_fraction: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            psi: vec![0.0, 1.5],
            q: QConfig::default(),
            reward: RewardSpec::default(),
            pseudo_unknown_fraction: 0.5,
        }
    }
}

/// Everything that determines a run. Seeds inside the nested sections are
/// ignored by the experiment drivers, which derive them from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub out_dir: PathBuf,
    pub classifier: ClassifierChoice,
    pub corpus: CorpusConfig,
    pub split: SplitSpec,
    pub pbmf: PbmfConfig,
    /// Scenario recognizer used for the "predicted scenarios" rows.
    pub detector: DetectorSpec,
    /// Object recognizer used for the "predicted objects" row.
    pub object_detector: DetectorSpec,
    pub logistic: LogisticConfig,
    pub wsvm: WsvmConfig,
    pub open_set: OpenSetConfig,
    pub dynamic: DynamicConfig,
    pub agent: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10,
            out_dir: PathBuf::from("out"),
            classifier: ClassifierChoice::Wsvm,
            corpus: CorpusConfig::default(),
            split: SplitSpec::default(),
            pbmf: PbmfConfig::default(),
            detector: DetectorSpec::default(),
            object_detector: DetectorSpec {
                mode: DetectorMode::Noisy,
                ..DetectorSpec::default()
            },
            logistic: LogisticConfig::default(),
            wsvm: WsvmConfig::default(),
            open_set: OpenSetConfig::default(),
            dynamic: DynamicConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(p) = &self.corpus.path {
            if !p.exists() {
                return bad(format!("corpus.path {} does not exist", p.display()));
            }
        }
        if self.corpus.views_per_scene == 0 || self.corpus.scenes_per_class == 0 {
            return bad("corpus needs at least one scene per class and one view per scene".into());
        }
        let f = &self.open_set;
        if !(f.known_fraction > 0.0 && f.known_fraction < 1.0) {
            return bad(format!("open_set.known_fraction must be in (0, 1), got {}", f.known_fraction));
        }
        if !(0.0..1.0).contains(&f.holdout_fraction) {
            return bad(format!("open_set.holdout_fraction must be in [0, 1), got {}", f.holdout_fraction));
        }
        if f.samples_per_scene == 0 {
            return bad("open_set.samples_per_scene must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.agent.pseudo_unknown_fraction) {
            return bad("agent.pseudo_unknown_fraction must be in [0, 1]".into());
        }
        if self.agent.psi.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("agent.psi values must be finite and non-negative".into());
        }
        self.pbmf.validate().map_err(|e| HarnessError::Config(format!("pbmf: {e}")))?;
        self.detector
            .validate()
            .map_err(|e| HarnessError::Config(format!("detector: {e}")))?;
        self.object_detector
            .validate()
            .map_err(|e| HarnessError::Config(format!("object_detector: {e}")))?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}
