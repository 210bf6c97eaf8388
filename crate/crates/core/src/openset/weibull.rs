use serde::{Deserialize, Serialize};

use super::{OpenSetError, Result};

pub const MIN_WEIBULL_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub v: f64,
    pub gamma: f64,
    pub kappa: f64,
    /// Reverse fits live on negated scores and use the survival form.
    pub reversed: bool,
}

/// CDF for forward parameters, survival function for reversed ones.
pub fn weibull_prob(params: &WeibullParams, x: f64) -> f64 {
    let z = if x >= params.v {
        ((x - params.v) / params.gamma).powf(params.kappa)
    } else {
        return if params.reversed { 1.0 } else { 0.0 };
    };
    let s = (-z).exp();
    if params.reversed {
        s
    } else {
        1.0 - s
    }
}

impl WeibullParams {
    /// Probability for a raw classifier score. Reverse fits were made on
    /// negated scores, so the score is negated before evaluation.
    pub fn score_prob(&self, score: f64) -> f64 {
        if self.reversed {
            weibull_prob(self, -score)
        } else {
            weibull_prob(self, score)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.gamma > 0.0 && self.kappa > 0.0 && self.gamma.is_finite() && self.kappa.is_finite()
    }
}

/// Location-anchored maximum likelihood fit on the `tail_fraction`
/// smallest samples.
pub fn fit_weibull_mle(samples: &[f64], tail_fraction: f64) -> Result<WeibullParams> {
    fit(samples, tail_fraction, false)
}

/// Reverse fit: the same estimator applied to the negated samples. Use
/// [`WeibullParams::score_prob`] to evaluate on raw scores.
pub fn fit_weibull_reversed(samples: &[f64], tail_fraction: f64) -> Result<WeibullParams> {
    let neg: Vec<f64> = samples.iter().map(|s| -s).collect();
    fit(&neg, tail_fraction, true)
}

fn fit(samples: &[f64], tail_fraction: f64, reversed: bool) -> Result<WeibullParams> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(OpenSetError::Parameter(format!("tail fraction {tail_fraction}")));
    }
    let mut xs: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    xs.sort_by(f64::total_cmp);
    let take = ((xs.len() as f64 * tail_fraction).ceil() as usize).min(xs.len());
    xs.truncate(take);
    if xs.len() < MIN_WEIBULL_SAMPLES {
        return Err(OpenSetError::DegenerateFit(format!(
            "{} usable samples, need {MIN_WEIBULL_SAMPLES}",
            xs.len()
        )));
    }
    let (min, max) = (xs[0], xs[xs.len() - 1]);
    let range = max - min;
    if !(range > 0.0) {
        return Err(OpenSetError::DegenerateFit("all samples are equal".into()));
    }
    let v = min - 1e-6 * range;
    let shifted: Vec<f64> = xs.iter().map(|x| x - v).collect();
    let (gamma, kappa) = two_parameter_mle(&shifted)?;
    Ok(WeibullParams {
        v,
        gamma,
        kappa,
        reversed,
    })
}

/// Solves the profile equation
/// `Σ xᵏ ln x / Σ xᵏ − 1/k − mean(ln x) = 0` for the shape, then the
/// scale in closed form. Data are scaled by their maximum for stability.
fn two_parameter_mle(x: &[f64]) -> Result<(f64, f64)> {
    let scale = x.iter().copied().fold(0.0, f64::max);
    let logs: Vec<f64> = x.iter().map(|v| (v / scale).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;

    let eval = |k: f64| -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let p = (k * l).exp();
            s0 += p;
            s1 += p * l;
            s2 += p * l * l;
        }
        let f = s1 / s0 - 1.0 / k - mean_log;
        let df = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k);
        (f, df)
    };

    // f is increasing in k; bracket the root and polish with safeguarded Newton.
    let (mut lo, mut hi) = (1e-3, 1.0);
    while eval(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(OpenSetError::DegenerateFit("shape diverged".into()));
        }
    }
    if eval(lo).0 > 0.0 {
        return Err(OpenSetError::DegenerateFit("shape below 1e-3".into()));
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = eval(k);
        if f.abs() < 1e-12 {
            break;
        }
        if f < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - f / df;
        k = if newton > lo && newton < hi && df > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-12 * k {
            break;
        }
    }
    let mean_pow = logs.iter().map(|l| (k * l).exp()).sum::<f64>() / logs.len() as f64;
    let gamma = scale * mean_pow.powf(1.0 / k);
    Ok((gamma, k))
}
