use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{OpenSetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Multiplier on the inverse Lipschitz step.
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 weight on the coefficient matrix (bias is not penalized).
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 400,
            l2: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Classes x features.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub config: LogisticConfig,
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Full-batch Nesterov gradient descent on the mean cross-entropy plus
/// `l2/2 ||W||^2`. Samples are rows of `features`.
pub fn fit_logistic(
    features: &Array2<f64>,
    labels: &[usize],
    config: &LogisticConfig,
) -> Result<LogisticModel> {
    let (n, d) = features.dim();
    if n != labels.len() {
        return Err(OpenSetError::Dimension(format!("{n} samples, {} labels", labels.len())));
    }
    for (i, row) in features.axis_iter(Axis(0)).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(OpenSetError::NonFinite(i));
        }
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut l = labels.to_vec();
        l.sort_unstable();
        l.dedup();
        l.len()
    };
    if distinct < 2 {
        return Err(OpenSetError::TooFewClasses(distinct));
    }

    let mut onehot = Array2::<f64>::zeros((n, classes));
    for (i, &y) in labels.iter().enumerate() {
        onehot[[i, y]] = 1.0;
    }
    let max_sq = features
        .axis_iter(Axis(0))
        .map(|r| r.dot(&r))
        .fold(0.0, f64::max);
    let lipschitz = 0.5 * (max_sq + 1.0) + config.l2;
    let step = config.learning_rate / lipschitz;

    let mut w = Array2::<f64>::zeros((classes, d));
    let mut b = Array1::<f64>::zeros(classes);
    let (mut w_prev, mut b_prev) = (w.clone(), b.clone());
    let inv_n = 1.0 / n as f64;
    for epoch in 0..config.epochs {
        let momentum = epoch as f64 / (epoch as f64 + 3.0);
        let wy = &w + &((&w - &w_prev) * momentum);
        let by = &b + &((&b - &b_prev) * momentum);
        let mut p = features.dot(&wy.t()) + &by;
        softmax_rows(&mut p);
        let err = p - &onehot;
        let gw = err.t().dot(features) * inv_n + &wy * config.l2;
        let gb = err.sum_axis(Axis(0)) * inv_n;
        w_prev = std::mem::replace(&mut w, wy - gw * step);
        b_prev = std::mem::replace(&mut b, by - gb * step);
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        config: config.clone(),
    })
}

impl LogisticModel {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let x = ndarray::ArrayView1::from(x);
        let z = self.weights.dot(&x) + &self.bias;
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    /// Argmax class, first index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}
