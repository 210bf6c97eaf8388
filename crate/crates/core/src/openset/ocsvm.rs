use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{OpenSetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcSvmConfig {
    pub nu: f64,
    /// Gaussian width; the median pairwise distance when unset.
    pub kernel_width: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OcSvmConfig {
    fn default() -> Self {
        Self {
            nu: 0.1,
            kernel_width: None,
            tolerance: 1e-4,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcSvmModel {
    pub coefficients: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub kernel_width: f64,
    pub rho: f64,
    pub nu: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of the pairwise Euclidean distances between rows, or 1 when
/// that median is zero.
pub fn median_pairwise_distance(x: &Array2<f64>) -> f64 {
    let rows: Vec<Vec<f64>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(sq_dist(&rows[i], &rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let m = if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Solves the ν-one-class dual `min ½ αᵀKα, 0 ≤ α ≤ 1/(νn), Σα = 1`
/// with maximal-violating-pair updates.
pub fn fit_ocsvm(x: &Array2<f64>, config: &OcSvmConfig) -> Result<OcSvmModel> {
    let n = x.nrows();
    if !(config.nu > 0.0 && config.nu <= 1.0) {
        return Err(OpenSetError::Parameter(format!("nu must lie in (0, 1], got {}", config.nu)));
    }
    if n < 2 {
        return Err(OpenSetError::TooFewSamples {
            class: "one-class".into(),
            found: n,
            needed: 2,
        });
    }
    for (i, row) in x.axis_iter(Axis(0)).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(OpenSetError::NonFinite(i));
        }
    }
    let sigma = match config.kernel_width {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(OpenSetError::Parameter(format!("kernel width {s}"))),
        None => median_pairwise_distance(x),
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let rows: Vec<Vec<f64>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0 + 1e-8;
        for j in i + 1..n {
            let v = (-gamma * sq_dist(&rows[i], &rows[j])).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }

    let upper = 1.0 / (config.nu * n as f64);
    let mut alpha = vec![1.0 / n as f64; n];
    let mut grad: Vec<f64> = k.sum_axis(Axis(1)).iter().map(|s| s / n as f64).collect();
    let eps = 1e-12;
    for _ in 0..config.max_iterations {
        // Moving mass from j to i lowers the objective when g_i < g_j.
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        for t in 0..n {
            if alpha[t] < upper - eps && (i == usize::MAX || grad[t] < grad[i]) {
                i = t;
            }
            if alpha[t] > eps && (j == usize::MAX || grad[t] > grad[j]) {
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || grad[j] - grad[i] <= config.tolerance {
            break;
        }
        let curvature = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(1e-12);
        let t = ((grad[j] - grad[i]) / curvature)
            .min(upper - alpha[i])
            .min(alpha[j]);
        alpha[i] += t;
        alpha[j] -= t;
        let (ki, kj) = (k.row(i), k.row(j));
        for (g, (a, b)) in grad.iter_mut().zip(ki.iter().zip(kj.iter())) {
            *g += t * (a - b);
        }
    }

    let free: Vec<f64> = (0..n)
        .filter(|&t| alpha[t] > eps && alpha[t] < upper - eps)
        .map(|t| grad[t])
        .collect();
    let rho = if free.is_empty() {
        let lo = (0..n)
            .filter(|&t| alpha[t] >= upper - eps)
            .map(|t| grad[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..n)
            .filter(|&t| alpha[t] <= eps)
            .map(|t| grad[t])
            .fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };

    let (coefficients, support_vectors) = alpha
        .iter()
        .zip(rows)
        .filter(|(a, _)| **a > eps)
        .map(|(a, r)| (*a, r))
        .unzip();
    Ok(OcSvmModel {
        coefficients,
        support_vectors,
        kernel_width: sigma,
        rho,
        nu: config.nu,
    })
}

impl OcSvmModel {
    /// `f(x) = Σ αᵢ K(xᵢ, x) − ρ`; positive inside the estimated support.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let gamma = 1.0 / (2.0 * self.kernel_width * self.kernel_width);
        self.coefficients
            .iter()
            .zip(&self.support_vectors)
            .map(|(a, sv)| a * (-gamma * sq_dist(sv, x)).exp())
            .sum::<f64>()
            - self.rho
    }
}
