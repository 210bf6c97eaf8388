//! Pseudo-Boolean matrix factorization.
//!
//! A binary objects x instances matrix `A` is approximated by
//! `min(W H, 1 + 0.01 W H)` with `W` (objects x scenarios) and `H`
//! (scenarios x instances) boxed to `[0, 1]`. The objective adds
//! penalties pulling both factors toward binary values, a row-group norm
//! on `H` that switches unused scenarios off, and an orthogonality term
//! that keeps scenarios from sharing objects:
//!
//! ```text
//! total = p0 + a1 p1 + a2 p2 + a3 p3 + a4 p4
//! p0 = || Omega o (A - clamp(W H)) ||_F^2
//! p1 = || H - H o H ||_F^2        p2 = || W - W o W ||_F^2
//! p3 = sum_j || H[j, :] ||_2      p4 = || W^T W - diag(W^T W) ||_F^2
//! ```
//!
//! `Omega` is an inverse-document-frequency weighting floored at 0.5.

mod refine;
mod solver;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use refine::{
    binarize, prune_scenarios, refinement_loop, DetectorProvider, RefinementConfig,
    RefinementData, RefinementResult, RoundRecord,
};
pub use solver::{
    dynamic_extend, pbmf_fit, solve_partial, solve_partial_weighted, DynamicExtension, FitResult,
    Fixed,
};

/// Crossover of `min(x, 1 + 0.01 x)`.
pub const CLAMP_KNEE: f64 = 1.0 / 0.99;
pub const CLAMP_SLOPE: f64 = 0.01;
/// Encodings at or above this value count as "scenario present".
pub const BINARY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PbmfError {
    #[error("input matrix must be binary; found {value} at ({row}, {col})")]
    NonBinary { row: usize, col: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("all scenarios pruned")]
    EmptyDictionary,
    #[error("empty input matrix")]
    EmptyInput,
    #[error("refinement round {round}: detector failed: {message}")]
    Detector { round: usize, message: String },
    #[error("refinement round {round}: {message}")]
    Evaluation { round: usize, message: String },
}

pub type Result<T> = std::result::Result<T, PbmfError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Initial,
    Refined(usize),
    Dynamic(usize),
}

/// Scenario dictionary: one column of `w` per scenario, rows aligned with objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDictionary {
    pub w: Array2<f64>,
    pub object_names: Vec<String>,
    pub provenance: Vec<Provenance>,
}

impl ScenarioDictionary {
    pub fn new(w: Array2<f64>, object_names: Vec<String>, tag: Provenance) -> Self {
        let k = w.ncols();
        Self {
            w,
            object_names,
            provenance: vec![tag; k],
        }
    }

    pub fn num_scenarios(&self) -> usize {
        self.w.ncols()
    }

    pub fn num_objects(&self) -> usize {
        self.w.nrows()
    }

    pub fn binarized(&self) -> ScenarioDictionary {
        ScenarioDictionary {
            w: binarize(&self.w),
            object_names: self.object_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Member object names of each binarized scenario.
    pub fn members(&self) -> Vec<Vec<String>> {
        self.w
            .axis_iter(Axis(1))
            .map(|col| {
                col.iter()
                    .zip(&self.object_names)
                    .filter(|(v, _)| **v >= BINARY_THRESHOLD)
                    .map(|(_, n)| n.clone())
                    .collect()
            })
            .collect()
    }

    /// Keeps the listed scenario columns in order.
    pub fn select(&self, keep: &[usize]) -> ScenarioDictionary {
        ScenarioDictionary {
            w: self.w.select(Axis(1), keep),
            object_names: self.object_names.clone(),
            provenance: keep.iter().map(|&j| self.provenance[j]).collect(),
        }
    }
}

/// Scenario encoding: column `j` encodes instance `j` of the factorized matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEncoding {
    pub h: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PbmfConfig {
    pub k: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub max_iters: usize,
    pub step_size: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Stop when the relative objective decrease over one sweep drops below this.
    pub tolerance: f64,
    pub prune_ratio: f64,
    /// Independent initializations tried by a full fit; the lowest objective wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PbmfConfig {
    fn default() -> Self {
        Self {
            k: 30,
            alpha1: 0.5,
            alpha2: 0.5,
            alpha3: 0.1,
            alpha4: 0.25,
            max_iters: 500,
            step_size: 0.1,
            backtrack: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
            tolerance: 1e-6,
            prune_ratio: 0.1,
            restarts: 3,
            seed: 0,
        }
    }
}

impl PbmfConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.alpha1, self.alpha2, self.alpha3, self.alpha4];
        if weights.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(PbmfError::Config("tradeoff weights must be finite and >= 0".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(PbmfError::Config("backtracking factor must lie in (0,1)".into()));
        }
        if !(0.0..1.0).contains(&self.prune_ratio) {
            return Err(PbmfError::Config("prune_ratio must lie in [0,1)".into()));
        }
        if self.restarts == 0 {
            return Err(PbmfError::Config("restarts must be >= 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(PbmfError::Config("step_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub total: f64,
}

/// IDF-style cell weights plus the counts they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfWeights {
    pub omega: Array2<f64>,
    /// Number of instances (columns).
    pub total_instances: usize,
    /// Instances containing each object.
    pub object_counts: Vec<usize>,
}

impl IdfWeights {
    /// Weights for a single instance using this matrix's counts as reference.
    /// Objects never seen in the reference count as seen once.
    pub fn weights_for(&self, presence: &[f64]) -> Vec<f64> {
        presence
            .iter()
            .zip(&self.object_counts)
            .map(|(&a, &cnt)| {
                cell_weight(a, self.total_instances.max(1) as f64, cnt.max(1) as f64)
            })
            .collect()
    }
}

fn cell_weight(a: f64, n_all: f64, n_obj: f64) -> f64 {
    if a > 0.0 {
        (a * (1.0 + (n_all / n_obj).ln())).max(0.5)
    } else {
        0.5
    }
}

pub fn compute_idf_weights(a: &Array2<f64>) -> IdfWeights {
    let n = a.ncols();
    let counts: Vec<usize> = a
        .axis_iter(Axis(0))
        .map(|row| row.iter().filter(|&&v| v > 0.0).count())
        .collect();
    let mut omega = Array2::from_elem(a.dim(), 0.5);
    for ((i, j), w) in omega.indexed_iter_mut() {
        if a[[i, j]] > 0.0 {
            *w = cell_weight(a[[i, j]], n as f64, counts[i] as f64);
        }
    }
    IdfWeights {
        omega,
        total_instances: n,
        object_counts: counts,
    }
}

#[inline]
pub fn soft_clamp(x: f64) -> f64 {
    x.min(1.0 + CLAMP_SLOPE * x)
}

/// Subgradient of [`soft_clamp`].
#[inline]
pub fn soft_clamp_slope(x: f64) -> f64 {
    if x < CLAMP_KNEE {
        1.0
    } else {
        CLAMP_SLOPE
    }
}

pub(crate) fn check_binary(a: &Array2<f64>) -> Result<()> {
    for ((row, col), &value) in a.indexed_iter() {
        if value != 0.0 && value != 1.0 {
            return Err(PbmfError::NonBinary { row, col, value });
        }
    }
    Ok(())
}

fn check_shapes(a: ArrayView2<f64>, w: ArrayView2<f64>, h: ArrayView2<f64>, omega: ArrayView2<f64>) -> Result<()> {
    if w.nrows() != a.nrows() || h.ncols() != a.ncols() || w.ncols() != h.nrows() || omega.dim() != a.dim() {
        return Err(PbmfError::Shape(format!(
            "A {:?}, W {:?}, H {:?}, Omega {:?}",
            a.dim(),
            w.dim(),
            h.dim(),
            omega.dim()
        )));
    }
    Ok(())
}

/// Evaluates every objective term.
pub fn pbmf_objective(
    a: &Array2<f64>,
    w: &Array2<f64>,
    h: &Array2<f64>,
    omega: &Array2<f64>,
    config: &PbmfConfig,
) -> Result<ObjectiveBreakdown> {
    check_shapes(a.view(), w.view(), h.view(), omega.view())?;
    let wh = w.dot(h);
    let omega_sq = omega.mapv(|o| o * o);
    Ok(objective_terms(a, &omega_sq, w, h, &wh, config))
}

pub(crate) fn reconstruction_term(a: &Array2<f64>, omega_sq: &Array2<f64>, wh: &Array2<f64>) -> f64 {
    let mut p0 = 0.0;
    Zip::from(a).and(omega_sq).and(wh).for_each(|&a, &o2, &x| {
        let r = a - soft_clamp(x);
        p0 += o2 * r * r;
    });
    p0
}

pub(crate) fn binariness(x: &Array2<f64>) -> f64 {
    x.iter().map(|&v| (v - v * v).powi(2)).sum()
}

pub(crate) fn group_norm(h: &Array2<f64>) -> f64 {
    h.axis_iter(Axis(0))
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

pub(crate) fn orthogonality(w: &Array2<f64>) -> f64 {
    let gram = w.t().dot(w);
    gram.indexed_iter()
        .filter(|((r, c), _)| r != c)
        .map(|(_, v)| v * v)
        .sum()
}

pub(crate) fn objective_terms(
    a: &Array2<f64>,
    omega_sq: &Array2<f64>,
    w: &Array2<f64>,
    h: &Array2<f64>,
    wh: &Array2<f64>,
    cfg: &PbmfConfig,
) -> ObjectiveBreakdown {
    let p0 = reconstruction_term(a, omega_sq, wh);
    let p1 = binariness(h);
    let p2 = binariness(w);
    let p3 = group_norm(h);
    let p4 = orthogonality(w);
    ObjectiveBreakdown {
        p0,
        p1,
        p2,
        p3,
        p4,
        total: p0 + cfg.alpha1 * p1 + cfg.alpha2 * p2 + cfg.alpha3 * p3 + cfg.alpha4 * p4,
    }
}

/// Boolean product of binarized factors, the interpretable reconstruction.
pub fn boolean_reconstruction(w: &Array2<f64>, h: &Array2<f64>) -> Array2<f64> {
    binarize(w).dot(&binarize(h)).mapv(|x| x.min(1.0))
}

/// Unweighted squared Frobenius reconstruction error `||A - clamp(W H)||^2`.
pub fn reconstruction_error(a: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let wh = w.dot(h);
    Zip::from(a)
        .and(&wh)
        .fold(0.0, |acc, &a, &x| acc + (a - soft_clamp(x)).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn idf_hand_values() {
        let w = compute_idf_weights(&array![[1.0], [0.0]]);
        assert_eq!(w.omega, array![[1.0], [0.5]]);

        let mut a = Array2::zeros((1, 100));
        for j in 0..10 {
            a[[0, j]] = 1.0;
        }
        let w = compute_idf_weights(&a);
        assert_abs_diff_eq!(w.omega[[0, 0]], 1.0 + 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.omega[[0, 0]], 3.302585, epsilon = 1e-6);
        assert_eq!(w.omega[[0, 50]], 0.5);
        assert!(w.omega.iter().all(|&o| o >= 0.5));
    }

    #[test]
    fn objective_fixtures() {
        let cfg = PbmfConfig {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.1,
            alpha4: 0.0,
            ..PbmfConfig::default()
        };
        let z = Array2::zeros((2, 2));
        let o = compute_idf_weights(&z).omega;
        let b = pbmf_objective(&z, &z, &z, &o, &cfg).unwrap();
        assert_eq!(b.total, 0.0);

        let eye = Array2::eye(2);
        let o = compute_idf_weights(&eye).omega;
        let b = pbmf_objective(&eye, &eye, &eye, &o, &cfg).unwrap();
        assert_eq!((b.p0, b.p1, b.p2, b.p4), (0.0, 0.0, 0.0, 0.0));
        assert_abs_diff_eq!(b.p3, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.total, 0.2, epsilon = 1e-12);

        let b = pbmf_objective(
            &array![[1.0]],
            &array![[1.0, 1.0]],
            &array![[1.0], [1.0]],
            &array![[1.0]],
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(b.p0, 4e-4, epsilon = 1e-12);
        assert_abs_diff_eq!(b.p4, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn clamp_branches() {
        assert_eq!(soft_clamp(0.5), 0.5);
        assert_eq!(soft_clamp_slope(0.5), 1.0);
        assert_abs_diff_eq!(soft_clamp(2.0), 1.02, epsilon = 1e-15);
        assert_eq!(soft_clamp_slope(2.0), 0.01);
        assert_eq!(soft_clamp_slope(1.0), 1.0);
        assert_eq!(soft_clamp_slope(1.0 / 0.99 + 1e-9), 0.01);
    }

    #[test]
    fn shape_mismatch() {
        let a = Array2::zeros((2, 3));
        let w = Array2::zeros((2, 2));
        let h = Array2::zeros((3, 3));
        let o = Array2::from_elem((2, 3), 0.5);
        assert!(matches!(
            pbmf_objective(&a, &w, &h, &o, &PbmfConfig::default()),
            Err(PbmfError::Shape(_))
        ));
    }
}
