//! Alternating projected gradient descent with backtracking line search.

use ndarray::{s, Array2, Axis, Zip};
use rand::seq::index::sample;
use rand::Rng as _;

use super::{
    check_binary, compute_idf_weights, objective_terms, soft_clamp, soft_clamp_slope,
    ObjectiveBreakdown, PbmfConfig, PbmfError, Provenance, Result, ScenarioDictionary,
};
use crate::rng::{rng_from, Rng};

#[derive(Debug, Clone)]
pub struct FitResult {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    /// Objective after every accepted line-search step, starting with the initial value.
    pub history: Vec<f64>,
    pub objective: ObjectiveBreakdown,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// The factor held constant by [`solve_partial`].
#[derive(Debug, Clone, Copy)]
pub enum Fixed<'a> {
    W(&'a Array2<f64>),
    H(&'a Array2<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    W,
    H,
}

struct Problem<'a> {
    a: &'a Array2<f64>,
    omega_sq: Array2<f64>,
    cfg: &'a PbmfConfig,
    /// Leading columns of W that never move.
    frozen_w: usize,
    blocks: Vec<Block>,
}

struct Iterate {
    w: Array2<f64>,
    h: Array2<f64>,
    wh: Array2<f64>,
    terms: ObjectiveBreakdown,
}

impl Problem<'_> {
    fn evaluate(&self, w: Array2<f64>, h: Array2<f64>) -> Iterate {
        let wh = w.dot(&h);
        let terms = objective_terms(self.a, &self.omega_sq, &w, &h, &wh, self.cfg);
        Iterate { w, h, wh, terms }
    }

    /// d p0 / d(WH), including the clamp slope.
    fn residual_gradient(&self, wh: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(wh.dim());
        Zip::from(&mut g)
            .and(self.a)
            .and(&self.omega_sq)
            .and(wh)
            .for_each(|g, &a, &o2, &x| {
                *g = -2.0 * o2 * (a - soft_clamp(x)) * soft_clamp_slope(x);
            });
        g
    }

    fn gradient(&self, it: &Iterate, block: Block) -> Array2<f64> {
        let g0 = self.residual_gradient(&it.wh);
        let binary_grad = |x: f64| 2.0 * (x - x * x) * (1.0 - 2.0 * x);
        match block {
            Block::W => {
                let mut g = g0.dot(&it.h.t());
                let gram = it.w.t().dot(&it.w);
                let mut off = gram;
                off.diag_mut().fill(0.0);
                let ortho = it.w.dot(&off);
                Zip::from(&mut g)
                    .and(&it.w)
                    .and(&ortho)
                    .for_each(|g, &w, &o| {
                        *g += self.cfg.alpha2 * binary_grad(w) + 4.0 * self.cfg.alpha4 * o;
                    });
                g.slice_mut(s![.., ..self.frozen_w]).fill(0.0);
                g
            }
            Block::H => {
                let mut g = it.w.t().dot(&g0);
                for (mut grow, hrow) in g.axis_iter_mut(Axis(0)).zip(it.h.axis_iter(Axis(0))) {
                    let norm = hrow.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Zip::from(&mut grow).and(&hrow).for_each(|g, &h| {
                        *g += self.cfg.alpha1 * binary_grad(h);
                        if norm > 0.0 {
                            *g += self.cfg.alpha3 * h / norm;
                        }
                    });
                }
                g
            }
        }
    }

    /// One projected, backtracked step on `block`. Returns the accepted iterate.
    fn step(&self, it: &Iterate, block: Block, step: &mut f64) -> Option<Iterate> {
        let g = self.gradient(it, block);
        let current = match block {
            Block::W => &it.w,
            Block::H => &it.h,
        };
        let mut t = *step;
        for _ in 0..self.cfg.max_backtracks {
            let mut cand = current.clone();
            Zip::from(&mut cand)
                .and(&g)
                .for_each(|x, &g| *x = (*x - t * g).clamp(0.0, 1.0));
            let decrease = Zip::from(&g)
                .and(&cand)
                .and(current)
                .fold(0.0, |acc, &g, &c, &x| acc + g * (c - x));
            if !(decrease < 0.0) {
                // Projection swallowed the whole step; nothing to gain here.
                return None;
            }
            let next = match block {
                Block::W => self.evaluate(cand, it.h.clone()),
                Block::H => self.evaluate(it.w.clone(), cand),
            };
            let f0 = it.terms.total;
            if next.terms.total <= f0 + self.cfg.armijo * decrease && next.terms.total <= f0 {
                *step = t / self.cfg.backtrack;
                return Some(next);
            }
            t *= self.cfg.backtrack;
        }
        *step = t;
        None
    }

    fn run(&self, w0: Array2<f64>, h0: Array2<f64>) -> FitResult {
        let mut it = self.evaluate(w0, h0);
        let mut history = vec![it.terms.total];
        let mut steps = [self.cfg.step_size; 2];
        let mut iterations = 0;
        while iterations < self.cfg.max_iters {
            iterations += 1;
            let before = it.terms.total;
            let mut moved = false;
            for &block in &self.blocks {
                let slot = &mut steps[block as usize];
                if let Some(next) = self.step(&it, block, slot) {
                    it = next;
                    history.push(it.terms.total);
                    moved = true;
                }
            }
            let after = it.terms.total;
            if !moved || after == 0.0 {
                break;
            }
            if (before - after) / before.abs().max(1e-12) < self.cfg.tolerance {
                break;
            }
        }
        FitResult {
            objective: it.terms,
            w: it.w,
            h: it.h,
            history,
            iterations,
            warnings: Vec::new(),
        }
    }
}

fn uniform(rng: &mut Rng, shape: (usize, usize), lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.random_range(lo..hi))
}

/// Dictionary init: up to `k` distinct nonzero columns of `a` plus U[0, 0.1]
/// noise. Columns beyond the number of distinct patterns are noise only.
fn init_dictionary(a: &Array2<f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let mut seen = std::collections::HashSet::new();
    let distinct: Vec<usize> = (0..a.ncols())
        .filter(|&j| {
            let col = a.column(j);
            col.iter().any(|&v| v > 0.0)
                && seen.insert(col.iter().map(|&v| v > 0.0).collect::<Vec<bool>>())
        })
        .collect();
    let take = k.min(distinct.len());
    let picks: Vec<usize> = sample(rng, distinct.len(), take)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    let mut w = Array2::zeros((a.nrows(), k));
    w.slice_mut(s![.., ..take]).assign(&a.select(Axis(1), &picks));
    w.mapv_inplace(|v| (v + rng.random_range(0.0..0.1)).clamp(0.0, 1.0));
    w
}

/// Factorizes a binary matrix.
pub fn pbmf_fit(a: &Array2<f64>, config: &PbmfConfig) -> Result<FitResult> {
    config.validate()?;
    check_binary(a)?;
    if a.is_empty() {
        return Err(PbmfError::EmptyInput);
    }
    if config.k == 0 {
        return Err(PbmfError::Config("k must be >= 1".into()));
    }
    let mut warnings = Vec::new();
    let k = if config.k > a.ncols() {
        warnings.push(format!(
            "k = {} exceeds instance count {}; capped",
            config.k,
            a.ncols()
        ));
        a.ncols()
    } else {
        config.k
    };
    let problem = Problem {
        a,
        omega_sq: compute_idf_weights(a).omega.mapv(|o| o * o),
        cfg: config,
        frozen_w: 0,
        blocks: vec![Block::W, Block::H],
    };
    let mut result: Option<FitResult> = None;
    for restart in 0..config.restarts {
        let mut rng = rng_from(config.seed, &[0xf17, restart as u64]);
        let w0 = init_dictionary(a, k, &mut rng);
        let h0 = uniform(&mut rng, (k, a.ncols()), 0.25, 0.75);
        let fit = problem.run(w0, h0);
        if result
            .as_ref()
            .is_none_or(|best| fit.objective.total < best.objective.total)
        {
            result = Some(fit);
        }
    }
    let mut result = result.expect("at least one restart");
    result.warnings = warnings;
    Ok(result)
}

/// Minimizes over one factor with the other held fixed.
///
/// The free factor starts at U[0, 0.1], so entries that receive no signal
/// from the reconstruction term settle at zero.
pub fn solve_partial(a: &Array2<f64>, fixed: Fixed<'_>, config: &PbmfConfig) -> Result<FitResult> {
    let omega = compute_idf_weights(a).omega;
    solve_partial_weighted(a, &omega, fixed, config)
}

/// [`solve_partial`] with caller-supplied cell weights.
pub fn solve_partial_weighted(
    a: &Array2<f64>,
    omega: &Array2<f64>,
    fixed: Fixed<'_>,
    config: &PbmfConfig,
) -> Result<FitResult> {
    config.validate()?;
    if omega.dim() != a.dim() {
        return Err(PbmfError::Shape(format!("A {:?} vs Omega {:?}", a.dim(), omega.dim())));
    }
    let mut rng = rng_from(config.seed, &[0x5017]);
    let (w0, h0, block) = match fixed {
        Fixed::W(w) => {
            if w.nrows() != a.nrows() {
                return Err(PbmfError::Shape(format!("W {:?} vs A {:?}", w.dim(), a.dim())));
            }
            let h0 = uniform(&mut rng, (w.ncols(), a.ncols()), 0.0, 0.1);
            (w.clone(), h0, Block::H)
        }
        Fixed::H(h) => {
            if h.ncols() != a.ncols() {
                return Err(PbmfError::Shape(format!("H {:?} vs A {:?}", h.dim(), a.dim())));
            }
            let w0 = uniform(&mut rng, (a.nrows(), h.nrows()), 0.0, 0.1);
            (w0, h.clone(), Block::W)
        }
    };
    let in_box = |x: &Array2<f64>| x.iter().all(|v| (0.0..=1.0).contains(v));
    if !in_box(&w0) || !in_box(&h0) {
        return Err(PbmfError::Shape("fixed factor outside [0,1]".into()));
    }
    let problem = Problem {
        a,
        omega_sq: omega.mapv(|o| o * o),
        cfg: config,
        frozen_w: 0,
        blocks: vec![block],
    };
    Ok(problem.run(w0, h0))
}

#[derive(Debug, Clone)]
pub struct DynamicExtension {
    /// Old scenarios followed by the surviving class-specific ones.
    pub dictionary: ScenarioDictionary,
    /// Encoding of the new-class instances over the extended dictionary.
    pub h: Array2<f64>,
    pub appended: usize,
    pub history: Vec<f64>,
}

/// Learns `config.k` class-specific scenarios from new-class data while
/// the existing dictionary stays frozen, prunes them, and appends the
/// survivors.
pub fn dynamic_extend(
    dictionary: &ScenarioDictionary,
    a_c: &Array2<f64>,
    class: usize,
    config: &PbmfConfig,
) -> Result<DynamicExtension> {
    config.validate()?;
    check_binary(a_c)?;
    if a_c.ncols() == 0 {
        return Err(PbmfError::EmptyInput);
    }
    if a_c.nrows() != dictionary.num_objects() {
        return Err(PbmfError::Shape(format!(
            "new-class matrix has {} objects, dictionary has {}",
            a_c.nrows(),
            dictionary.num_objects()
        )));
    }
    let k_old = dictionary.num_scenarios();
    let k_c = config.k.min(a_c.ncols());
    let mut rng = rng_from(config.seed, &[0xd1a, class as u64]);
    // Old rows start from the frozen dictionary's own encoding; candidates
    // start from what that encoding leaves unexplained.
    let (h_old, residual) = if k_old > 0 {
        let h = solve_partial(a_c, Fixed::W(&dictionary.w), config)?.h;
        let recon = super::boolean_reconstruction(&dictionary.w, &h);
        let residual = Zip::from(a_c)
            .and(&recon)
            .map_collect(|&a, &r| if a > 0.0 && r == 0.0 { 1.0 } else { 0.0 });
        (h, residual)
    } else {
        (Array2::zeros((0, a_c.ncols())), a_c.clone())
    };
    let w_c = init_dictionary(&residual, k_c, &mut rng);
    let mut w0 = Array2::zeros((a_c.nrows(), k_old + k_c));
    w0.slice_mut(s![.., ..k_old]).assign(&dictionary.w);
    w0.slice_mut(s![.., k_old..]).assign(&w_c);
    let mut h0 = uniform(&mut rng, (k_old + k_c, a_c.ncols()), 0.25, 0.75);
    h0.slice_mut(s![..k_old, ..]).assign(&h_old);

    let problem = Problem {
        a: a_c,
        omega_sq: compute_idf_weights(a_c).omega.mapv(|o| o * o),
        cfg: config,
        frozen_w: k_old,
        blocks: vec![Block::W, Block::H],
    };
    let fit = problem.run(w0, h0);

    // Only new scenarios are candidates for pruning; the threshold is
    // relative to the strongest row overall. Candidates without any member
    // object after binarization explain nothing and are dropped as well.
    let norms: Vec<f64> = fit
        .h
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    let threshold = config.prune_ratio * max;
    let kept_new: Vec<usize> = (k_old..k_old + k_c)
        .filter(|&j| norms[j] > 0.0 && norms[j] >= threshold)
        .filter(|&j| fit.w.column(j).iter().any(|&v| v >= super::BINARY_THRESHOLD))
        .collect();
    let keep: Vec<usize> = (0..k_old).chain(kept_new.iter().copied()).collect();

    let mut w = fit.w.select(Axis(1), &keep);
    // Bit-exact copy of the frozen block.
    w.slice_mut(s![.., ..k_old]).assign(&dictionary.w);
    let mut provenance = dictionary.provenance.clone();
    provenance.extend(std::iter::repeat_n(Provenance::Dynamic(class), kept_new.len()));
    Ok(DynamicExtension {
        dictionary: ScenarioDictionary {
            w,
            object_names: dictionary.object_names.clone(),
            provenance,
        },
        h: fit.h.select(Axis(0), &keep),
        appended: kept_new.len(),
        history: fit.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbmf::{boolean_reconstruction, pbmf_objective, reconstruction_error, binarize};
    use ndarray::{array, concatenate};

    fn cfg(k: usize) -> PbmfConfig {
        PbmfConfig {
            k,
            ..PbmfConfig::default()
        }
    }

    #[test]
    fn zero_matrix_goes_to_zero() {
        let a = Array2::zeros((6, 8));
        let fit = pbmf_fit(&a, &cfg(3)).unwrap();
        assert!(fit.objective.total < 1e-3, "{:?}", fit.objective);
        assert!(fit.h.iter().all(|&v| v < 0.05));
    }

    #[test]
    fn history_is_monotone_and_factors_in_box() {
        let mut rng = rng_from(11, &[]);
        let a = Array2::from_shape_fn((15, 25), |_| f64::from(rng.random::<f64>() < 0.3));
        let fit = pbmf_fit(&a, &cfg(4)).unwrap();
        for pair in fit.history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
        assert!(fit.w.iter().chain(fit.h.iter()).all(|v| (0.0..=1.0).contains(v)));
        let omega = compute_idf_weights(&a).omega;
        let check = pbmf_objective(&a, &fit.w, &fit.h, &omega, &cfg(4)).unwrap();
        assert!((check.total - *fit.history.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_binary_and_caps_k() {
        let a = array![[0.0, 0.5]];
        assert!(matches!(pbmf_fit(&a, &cfg(1)), Err(PbmfError::NonBinary { .. })));
        let a = array![[1.0, 0.0], [0.0, 1.0]];
        let fit = pbmf_fit(&a, &cfg(5)).unwrap();
        assert_eq!(fit.w.ncols(), 2);
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn identity_encoding_fixed_point() {
        let eye = Array2::<f64>::eye(3);
        let fit = solve_partial(&eye, Fixed::W(&eye), &cfg(3)).unwrap();
        assert_eq!(binarize(&fit.h), eye);
        assert!(fit.h.iter().all(|v| (0.0..=1.0).contains(v)));
        for pair in fit.history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
    }

    #[test]
    fn zero_encoding_gives_zero_dictionary() {
        let mut rng = rng_from(2, &[]);
        let a = Array2::from_shape_fn((8, 10), |_| f64::from(rng.random::<f64>() < 0.4));
        let h = Array2::zeros((3, 10));
        let fit = solve_partial(&a, Fixed::H(&h), &cfg(3)).unwrap();
        assert!(fit.w.iter().all(|&v| v < 1e-3), "max {}", fit.w.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn dynamic_extend_freezes_and_covers_new_objects() {
        // Two old scenarios over objects 0..6, new class over objects 6..10.
        let w_old = array![
            [1.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.0, 0.0],
            [0.0, 0.0],
            [0.0, 0.0],
            [0.0, 0.0]
        ];
        let dict = ScenarioDictionary::new(w_old.clone(), (0..10).map(|i| format!("o{i}")).collect(), Provenance::Initial);
        let col = array![[0.0], [0.0], [0.0], [0.0], [0.0], [0.0], [1.0], [1.0], [1.0], [1.0]];
        let a_c = concatenate(Axis(1), &vec![col.view(); 12]).unwrap();
        let ext = dynamic_extend(&dict, &a_c, 7, &cfg(3)).unwrap();
        assert_eq!(ext.dictionary.w.slice(s![.., ..2]), w_old);
        assert!(ext.appended >= 1);
        assert!(ext.dictionary.provenance[2..].iter().all(|p| *p == Provenance::Dynamic(7)));

        let old_only = solve_partial(&a_c, Fixed::W(&w_old), &cfg(2)).unwrap();
        let err_old = reconstruction_error(&a_c, &w_old, &old_only.h);
        let err_new = reconstruction_error(&a_c, &ext.dictionary.w, &ext.h);
        assert!(err_new < err_old, "{err_new} vs {err_old}");
        assert_eq!(boolean_reconstruction(&ext.dictionary.w, &ext.h), a_c);
    }

    #[test]
    fn dynamic_extend_prunes_redundant_candidates() {
        let w_old = array![
            [1.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.0, 1.0]
        ];
        let dict = ScenarioDictionary::new(w_old.clone(), (0..6).map(|i| format!("o{i}")).collect(), Provenance::Initial);
        // Instances are unions of the existing scenarios.
        let cols = [
            array![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            array![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            array![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ];
        let views: Vec<_> = (0..12).map(|j| cols[j % 3].view().insert_axis(Axis(1))).collect();
        let a_c = concatenate(Axis(1), &views).unwrap();
        let ext = dynamic_extend(&dict, &a_c, 3, &cfg(4)).unwrap();
        assert_eq!(ext.appended, 0);
        assert_eq!(ext.dictionary.w, w_old);
    }

    #[test]
    fn dynamic_extend_errors() {
        let dict = ScenarioDictionary::new(Array2::eye(3), vec!["a".into(), "b".into(), "c".into()], Provenance::Initial);
        assert!(matches!(dynamic_extend(&dict, &Array2::zeros((4, 2)), 0, &cfg(2)), Err(PbmfError::Shape(_))));
        assert!(matches!(dynamic_extend(&dict, &Array2::zeros((3, 0)), 0, &cfg(2)), Err(PbmfError::EmptyInput)));
    }
}
