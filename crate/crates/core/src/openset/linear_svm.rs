use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{dot, OpenSetError, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSvmConfig {
    pub c: f64,
    /// Absolute duality-gap tolerance.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for LinearSvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 20_000,
            seed: 0,
        }
    }
}

/// One-vs-rest linear SVM, one row of `weights` per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    pub c: f64,
    /// Duality gap of each binary problem at termination.
    pub gaps: Vec<f64>,
}

impl LinearSvmModel {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn decision(&self, class: usize, x: &[f64]) -> f64 {
        self.weights
            .row(class)
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias[class]
    }

    pub fn decisions(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_classes()).map(|c| self.decision(c, x)).collect()
    }
}

pub(crate) struct BinarySolution {
    /// Weights with the bias as the last entry.
    pub w: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub alpha: Vec<f64>,
    pub gap: f64,
}

fn duality_gap(rows: &[Vec<f64>], y: &[f64], w: &[f64], alpha: &[f64], c: f64) -> f64 {
    let half_norm = 0.5 * dot(w, w);
    let hinge: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, yi)| (1.0 - yi * dot(w, x)).max(0.0))
        .sum();
    let primal = half_norm + c * hinge;
    let dual = alpha.iter().sum::<f64>() - half_norm;
    primal - dual
}

/// Hinge-loss dual coordinate descent. Rows already carry the constant
/// bias feature. Labels are ±1.
pub(crate) fn solve_binary(rows: &[Vec<f64>], y: &[f64], cfg: &LinearSvmConfig) -> BinarySolution {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let q: Vec<f64> = rows.iter().map(|x| dot(x, x)).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from(cfg.seed, &[0x53564d]);
    let mut gap = duality_gap(rows, y, &w, &alpha, cfg.c);
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            if q[i] <= 0.0 {
                continue;
            }
            let g = y[i] * dot(&w, &rows[i]) - 1.0;
            let next = (alpha[i] - g / q[i]).clamp(0.0, cfg.c);
            let delta = next - alpha[i];
            if delta != 0.0 {
                alpha[i] = next;
                for (wj, xj) in w.iter_mut().zip(&rows[i]) {
                    *wj += delta * y[i] * xj;
                }
            }
        }
        gap = duality_gap(rows, y, &w, &alpha, cfg.c);
        if gap <= cfg.tolerance {
            break;
        }
    }
    BinarySolution { w, alpha, gap }
}

/// Fits one binary hinge-loss model per class against all others.
pub fn fit_linear_svm_ovr(
    features: &Array2<f64>,
    labels: &[usize],
    class_names: &[String],
    config: &LinearSvmConfig,
) -> Result<LinearSvmModel> {
    let (n, d) = features.dim();
    if n != labels.len() {
        return Err(OpenSetError::Dimension(format!("{n} samples, {} labels", labels.len())));
    }
    if class_names.len() < 2 {
        return Err(OpenSetError::TooFewClasses(class_names.len()));
    }
    if !(config.c > 0.0) {
        return Err(OpenSetError::Parameter(format!("C must be positive, got {}", config.c)));
    }
    for (c, name) in class_names.iter().enumerate() {
        if !labels.contains(&c) {
            return Err(OpenSetError::EmptyClass(name.clone()));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
        return Err(OpenSetError::Dimension(format!("label {bad} without a class name")));
    }
    let rows: Vec<Vec<f64>> = features
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, r)| {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(OpenSetError::NonFinite(i));
            }
            let mut v = r.to_vec();
            v.push(1.0);
            Ok(v)
        })
        .collect::<Result<_>>()?;

    let k = class_names.len();
    let mut weights = Array2::zeros((k, d));
    let mut bias = vec![0.0; k];
    let mut gaps = vec![0.0; k];
    for c in 0..k {
        let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let cfg = LinearSvmConfig {
            seed: crate::rng::derive_seed(config.seed, &[c as u64]),
            ..config.clone()
        };
        let sol = solve_binary(&rows, &y, &cfg);
        for j in 0..d {
            weights[[c, j]] = sol.w[j];
        }
        bias[c] = sol.w[d];
        gaps[c] = sol.gap;
    }
    Ok(LinearSvmModel {
        weights,
        bias,
        c: config.c,
        gaps,
    })
}
