//! Scene classifiers: a multinomial logistic baseline and the
//! Weibull-calibrated SVM used for open-set decisions.

mod explain;
mod linear_svm;
mod logistic;
mod ocsvm;
mod weibull;
mod wsvm;

use thiserror::Error;

pub use explain::{explain_prediction, Influence, INFLUENCE_REPORT_THRESHOLD};
pub use linear_svm::{fit_linear_svm_ovr, LinearSvmConfig, LinearSvmModel};
pub use logistic::{fit_logistic, LogisticConfig, LogisticModel};
pub use ocsvm::{fit_ocsvm, median_pairwise_distance, OcSvmConfig, OcSvmModel};
pub use weibull::{fit_weibull_mle, fit_weibull_reversed, weibull_prob, WeibullParams, MIN_WEIBULL_SAMPLES};
pub use wsvm::{
    calibrate_thresholds, calibrate_thresholds_pooled, fit_wsvm, wsvm_decide, ClassCalibration, ClassProbabilities, Decision, ThresholdGrid,
    ThresholdSelection, WsvmConfig, WsvmModel,
};

#[derive(Debug, Error)]
pub enum OpenSetError {
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("class `{0}` has no samples")]
    EmptyClass(String),
    #[error("class `{class}` has {found} samples, need at least {needed}")]
    TooFewSamples {
        class: String,
        found: usize,
        needed: usize,
    },
    #[error("non-finite feature at sample {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate Weibull fit: {0}")]
    DegenerateFit(String),
    #[error("validation set has no unknown samples; hold out some known classes as pseudo-unknowns")]
    NoUnknowns,
    #[error("calibration for class `{class}`: {source}")]
    Calibration {
        class: String,
        #[source]
        source: Box<OpenSetError>,
    },
    #[error("model file: {0}")]
    Persist(String),
}

pub type Result<T> = std::result::Result<T, OpenSetError>;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
