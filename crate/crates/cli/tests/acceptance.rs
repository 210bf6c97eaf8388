//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! and prints one PASS/FAIL line per check; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::{array, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;

use scenario_core::agent::{env_step, Action, RewardSpec, SceneEpisode};
use scenario_core::dataset::{generate_with_truth, GeneratorSpec};
use scenario_core::detector::ScenarioScores;
use scenario_core::fusion::{fuse_views, incremental_fuse, FusedScores};
use scenario_core::harness::{
    csv_body, run_active_trials, run_closed_set, run_dynamic_comparison, run_open_set_trials,
    ExperimentConfig,
};
use scenario_core::openset::{
    fit_linear_svm_ovr, fit_ocsvm, fit_weibull_mle, fit_wsvm, weibull_prob, wsvm_decide,
    LinearSvmConfig, OcSvmConfig, WeibullParams, WsvmConfig, WsvmModel,
};
use scenario_core::pbmf::{
    binarize, boolean_reconstruction, compute_idf_weights, pbmf_fit, pbmf_objective, PbmfConfig,
};
use scenario_core::rng::{rng_from, Rng};

type Outcome = Result<String, String>;

const ACTIVE: &str = include_str!("../../../configs/acceptance/active.toml");
const DYNAMIC: &str = include_str!("../../../configs/acceptance/dynamic.toml");
const CLOSED: &str = include_str!("../../../configs/acceptance/closed_set.toml");
const OPEN: &str = include_str!("../../../configs/acceptance/open_set.toml");

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- pbmf

fn idf_weights() -> Outcome {
    let a = array![
        [1.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0, 1.0, 1.0],
    ];
    // 1 + ln(5/count) for present cells, 0.5 elsewhere.
    let present = [1.0, 2.6094379124341005, 0.5, 1.916290731874155, 1.2231435513142097];
    let w = compute_idf_weights(&a);
    let mut worst: f64 = 0.0;
    for ((i, j), &o) in w.omega.indexed_iter() {
        let want = if a[[i, j]] > 0.0 { present[i] } else { 0.5 };
        worst = worst.max((o - want).abs());
    }
    ensure(worst <= 1e-12, || format!("5x5 fixture off by {worst:e}"))?;

    let mut b = Array2::zeros((1, 100));
    for j in 0..10 {
        b[[0, j * 10]] = 1.0;
    }
    let o = compute_idf_weights(&b).omega[[0, 0]];
    ensure(close(o, 3.302585092994046, 1e-12), || format!("10 of 100 gives {o}"))?;
    Ok(format!("max abs error {worst:.1e}, 10/100 -> {o:.6}"))
}

fn objective_fixtures() -> Outcome {
    let none = PbmfConfig {
        alpha1: 0.0,
        alpha2: 0.0,
        alpha3: 0.0,
        alpha4: 0.0,
        ..PbmfConfig::default()
    };
    let z = Array2::<f64>::zeros((2, 2));
    let t = pbmf_objective(&z, &z, &z, &Array2::ones((2, 2)), &PbmfConfig::default()).map_err(err)?;
    ensure(t.total.abs() <= 1e-9, || format!("zero fixture total {}", t.total))?;

    let i2 = Array2::<f64>::eye(2);
    let cfg = PbmfConfig { alpha3: 0.1, ..none.clone() };
    let t = pbmf_objective(&i2, &i2, &i2, &Array2::ones((2, 2)), &cfg).map_err(err)?;
    ensure(close(t.p3, 2.0, 1e-9) && close(t.total, 0.2, 1e-9), || {
        format!("identity fixture p3 {} total {}", t.p3, t.total)
    })?;

    // WH = 2 saturates to 1.02, so the residual is 0.02.
    let w = array![[1.0, 1.0]];
    let h = array![[1.0], [1.0]];
    let a = array![[1.0]];
    let t = pbmf_objective(&a, &w, &h, &array![[1.0]], &none).map_err(err)?;
    ensure(close(t.p0, 4e-4, 1e-9) && close(t.p4, 2.0, 1e-9), || {
        format!("clamp fixture p0 {} p4 {}", t.p0, t.p4)
    })?;
    Ok("zero, identity and saturation fixtures match".into())
}

fn random_binary(rng: &mut Rng, m: usize, n: usize, density: f64) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |_| if rng.random::<f64>() < density { 1.0 } else { 0.0 })
}

fn monotone_descent() -> Outcome {
    let mut rng = rng_from(11, &[]);
    let mut steps = 0;
    for p in 0..20u64 {
        let m = rng.random_range(5..=40);
        let n = rng.random_range(10..=80);
        let a = random_binary(&mut rng, m, n, 0.3);
        let cfg = PbmfConfig {
            k: rng.random_range(2..=8),
            restarts: 1,
            max_iters: 150,
            seed: p,
            ..PbmfConfig::default()
        };
        let fit = pbmf_fit(&a, &cfg).map_err(err)?;
        for (i, pair) in fit.history.windows(2).enumerate() {
            ensure(pair[1] <= pair[0] + 1e-9, || {
                format!("problem {p}: step {i} rose from {} to {}", pair[0], pair[1])
            })?;
        }
        steps += fit.history.len();
    }
    Ok(format!("20 problems, {steps} recorded steps, none increasing"))
}

fn planted_spec(seed: u64) -> GeneratorSpec {
    let vocab: Vec<String> = (0..30).map(|i| format!("o{i:02}")).collect();
    let template = |t: usize| vocab[6 * t..6 * t + 6].to_vec();
    GeneratorSpec {
        num_classes: 3,
        scenes_per_class: 5,
        views_per_scene: 4,
        object_vocabulary: vocab.clone(),
        class_names: vec!["a".into(), "b".into(), "c".into()],
        class_scenario_templates: vec![
            vec![template(0), template(1)],
            vec![template(2), template(3)],
            vec![template(4), template(0)],
        ],
        scenario_presence_rate: 0.6,
        object_dropout_rate: 0.0,
        distractor_rate: 0.0,
        adversarial_view_rate: 0.0,
        seed,
    }
}

fn planted_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let (corpus, _) = generate_with_truth(&planted_spec(seed)).map_err(err)?;
        let a = corpus.view_matrix();
        let fit = pbmf_fit(&a, &PbmfConfig { k: 5, seed, ..PbmfConfig::default() }).map_err(err)?;
        let recon = boolean_reconstruction(&binarize(&fit.w), &binarize(&fit.h));
        let diff = recon.iter().zip(a.iter()).filter(|(x, y)| x != y).count();
        let h = diff as f64 / a.len() as f64;
        worst = worst.max(h);
        ensure(h <= 0.05, || format!("seed {seed}: hamming {h:.4}"))?;
    }
    Ok(format!("worst hamming {worst:.4} over 5 seeds"))
}

// ------------------------------------------------------------- open set

fn weibull_cdf(v: f64, gamma: f64, kappa: f64, x: f64) -> f64 {
    if x < v {
        0.0
    } else {
        1.0 - (-((x - v) / gamma).powf(kappa)).exp()
    }
}

fn weibull_fit() -> Outcome {
    let fwd = WeibullParams { v: 0.5, gamma: 2.0, kappa: 1.5, reversed: false };
    let rev = WeibullParams { reversed: true, ..fwd };
    ensure(close(weibull_prob(&fwd, 2.5), 0.6321205588285577, 1e-12), || "CDF at v + gamma".into())?;
    ensure(close(weibull_prob(&rev, 2.5), 1.0 - 0.6321205588285577, 1e-12), || "survival at v + gamma".into())?;
    for x in [-1.0, 0.5, 0.7, 1.3, 2.0, 4.0, 9.0] {
        let want = weibull_cdf(0.5, 2.0, 1.5, x);
        ensure(close(weibull_prob(&fwd, x), want, 1e-12), || format!("CDF at {x}"))?;
        ensure(close(weibull_prob(&rev, x), 1.0 - want, 1e-12), || format!("survival at {x}"))?;
    }

    let (gamma, kappa) = (2.0, 1.5);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut rng = rng_from(seed, &[0x3b]);
        let samples: Vec<f64> = (0..2000)
            .map(|_| gamma * (-(1.0 - rng.random::<f64>()).ln()).powf(1.0 / kappa))
            .collect();
        let fit = fit_weibull_mle(&samples, 1.0).map_err(err)?;
        let eg = (fit.gamma - gamma).abs() / gamma;
        let ek = (fit.kappa - kappa).abs() / kappa;
        worst = worst.max(eg).max(ek);
        ensure(eg <= 0.1 && ek <= 0.1, || {
            format!("seed {seed}: gamma {:.3} kappa {:.3}", fit.gamma, fit.kappa)
        })?;
    }
    Ok(format!("closed form exact, worst MLE relative error {worst:.3}"))
}

/// Three Gaussian blobs in four dimensions, `per_class` points each.
fn blobs(rng: &mut Rng, per_class: usize, spread: f64) -> (Array2<f64>, Vec<usize>) {
    let centers = [[1.0, 0.0, 0.0, 0.2], [0.0, 1.0, 0.0, 0.2], [0.0, 0.0, 1.0, 0.2]];
    let n = per_class * centers.len();
    let mut x = Array2::zeros((n, 4));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i / per_class;
        for j in 0..4 {
            x[[i, j]] = centers[c][j] + spread * (rng.random::<f64>() - 0.5);
        }
        y.push(c);
    }
    (x, y)
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

fn wsvm_argmax() -> Outcome {
    let mut rng = rng_from(21, &[]);
    let (x, y) = blobs(&mut rng, 30, 0.8);
    let model = fit_wsvm(&x, &y, &names(3), &WsvmConfig::default()).map_err(err)?.with_thresholds(0.0, 0.0);
    let prob = |p: &WeibullParams, s: f64| {
        if p.reversed {
            1.0 - weibull_cdf(p.v, p.gamma, p.kappa, -s)
        } else {
            weibull_cdf(p.v, p.gamma, p.kappa, s)
        }
    };
    let oracle = |m: &WsvmModel, probe: &[f64]| {
        let mut best = (0, f64::NEG_INFINITY);
        for (c, cal) in m.classes.iter().enumerate() {
            let s: f64 = m.svm.weights.row(c).iter().zip(probe).map(|(w, v)| w * v).sum::<f64>() + m.svm.bias[c];
            let p = prob(&cal.p_r_plus, s) * prob(&cal.p_r_minus, s);
            if p > best.1 {
                best = (c, p);
            }
        }
        best.0
    };
    for i in 0..1000 {
        let probe: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..1.5)).collect();
        let got = wsvm_decide(&model, &probe).class();
        let want = oracle(&model, &probe);
        ensure(got == Some(want), || format!("probe {i}: decide {got:?}, argmax {want}"))?;
    }
    Ok("1000 probes agree".into())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Independent hinge-loss dual ascent on rows with a constant 1 appended;
/// returns the dual objective at (near) optimum.
fn dual_oracle(rows: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let d = rows[0].len();
    let mut alpha = vec![0.0; rows.len()];
    let mut w = vec![0.0; d];
    let dual = |alpha: &[f64], w: &[f64]| alpha.iter().sum::<f64>() - 0.5 * dot(w, w);
    for _ in 0..50_000 {
        for i in 0..rows.len() {
            let q = dot(&rows[i], &rows[i]);
            let g = y[i] * dot(&w, &rows[i]) - 1.0;
            let next = (alpha[i] - g / q).clamp(0.0, c);
            let delta = next - alpha[i];
            alpha[i] = next;
            for (wj, xj) in w.iter_mut().zip(&rows[i]) {
                *wj += delta * y[i] * xj;
            }
        }
        let primal = 0.5 * dot(&w, &w)
            + c * rows.iter().zip(y).map(|(x, yi)| (1.0 - yi * dot(&w, x)).max(0.0)).sum::<f64>();
        if primal - dual(&alpha, &w) <= 1e-9 {
            break;
        }
    }
    dual(&alpha, &w)
}

fn svm_optimality() -> Outcome {
    let mut rng = rng_from(31, &[]);
    let mut worst_nu: f64 = 0.0;
    for fit in 0..10 {
        let n = rng.random_range(60..=100);
        let d = rng.random_range(2..=5);
        let nu = [0.1, 0.2, 0.3, 0.4, 0.5][fit % 5];
        let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let model = fit_ocsvm(&x, &OcSvmConfig { nu, ..OcSvmConfig::default() }).map_err(err)?;
        let outliers = x.rows().into_iter().filter(|r| model.decision(&r.to_vec()) < -1e-4).count();
        let (fo, fs) = (outliers as f64 / n as f64, model.support_vectors.len() as f64 / n as f64);
        let slack = 1.0 / n as f64;
        ensure(fo <= nu + slack && fs >= nu - slack, || {
            format!("one-class fit {fit}: nu {nu}, outliers {fo:.3}, support {fs:.3}")
        })?;
        worst_nu = worst_nu.max(fo - nu).max(nu - fs);
    }

    let mut worst_gap: f64 = 0.0;
    for fit in 0..10 {
        let per_class = rng.random_range(15..=30);
        let (x, y) = blobs(&mut rng, per_class, 1.2);
        let cfg = LinearSvmConfig { c: [0.5, 1.0, 2.0][fit % 3], seed: fit as u64, ..LinearSvmConfig::default() };
        let model = fit_linear_svm_ovr(&x, &y, &names(3), &cfg).map_err(err)?;
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.iter().copied().chain([1.0]).collect()).collect();
        for c in 0..3 {
            let yc: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let w: Vec<f64> = model.weights.row(c).iter().copied().chain([model.bias[c]]).collect();
            let primal = 0.5 * dot(&w, &w)
                + cfg.c * rows.iter().zip(&yc).map(|(r, yi)| (1.0 - yi * dot(&w, r)).max(0.0)).sum::<f64>();
            let gap = primal - dual_oracle(&rows, &yc, cfg.c);
            worst_gap = worst_gap.max(gap);
            ensure(gap <= 1e-4, || format!("linear fit {fit} class {c}: certified gap {gap:e}"))?;
        }
    }
    Ok(format!("nu bounds hold (worst excess {worst_nu:.3}), worst certified gap {worst_gap:.1e}"))
}

// --------------------------------------------------------------- fusion

fn fusion_algebra() -> Outcome {
    let mut rng = rng_from(41, &[]);
    let d = 6;
    for set in 0..1000 {
        let n = rng.random_range(1..=8);
        let views: Vec<ScenarioScores> =
            (0..n).map(|_| ScenarioScores((0..d).map(|_| rng.random::<f64>()).collect())).collect();
        let pairs: Vec<(usize, &ScenarioScores)> = views.iter().enumerate().collect();
        let batch = fuse_views(&pairs).map_err(err)?;

        let max: Vec<f64> = (0..d).map(|j| views.iter().map(|v| v.0[j]).fold(f64::MIN, f64::max)).collect();
        ensure(batch.scores == max, || format!("set {set}: not the elementwise max"))?;
        for v in &views {
            ensure(batch.scores.iter().zip(&v.0).all(|(f, s)| f >= s), || format!("set {set}: below a view"))?;
        }

        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        ensure(fuse_views(&shuffled).map_err(err)? == batch, || format!("set {set}: order matters"))?;

        let mut fold = FusedScores::from_view(0, &views[0]);
        for (i, v) in views.iter().enumerate().skip(1) {
            let next = incremental_fuse(&fold, i, v).map_err(err)?;
            ensure(next.scores.iter().zip(&fold.scores).all(|(a, b)| a >= b), || {
                format!("set {set}: adding a view lowered a score")
            })?;
            fold = next;
        }
        ensure(fold == batch, || format!("set {set}: fold differs from batch"))?;

        for (i, v) in views.iter().enumerate() {
            ensure(incremental_fuse(&batch, i, v).map_err(err)? == batch, || format!("set {set}: not idempotent"))?;
        }

        if n >= 3 {
            let split = rng.random_range(1..n);
            let left = fuse_views(&pairs[..split]).map_err(err)?;
            let right = fuse_views(&pairs[split..]).map_err(err)?;
            let joined = incremental_fuse(&left, n, &ScenarioScores(right.scores.clone())).map_err(err)?;
            ensure(joined.scores == batch.scores, || format!("set {set}: grouping matters"))?;
        }
    }
    Ok("1000 random sets, no violations".into())
}

// ---------------------------------------------------------------- agent

fn reward_table() -> Outcome {
    let mut rng = rng_from(51, &[]);
    let mut x = Array2::zeros((40, 2));
    let mut y = Vec::new();
    for i in 0..40 {
        let c = i / 20;
        let (a, b) = if c == 0 { (0.9, 0.1) } else { (0.1, 0.9) };
        x[[i, 0]] = a + 0.1 * (rng.random::<f64>() - 0.5);
        x[[i, 1]] = b + 0.1 * (rng.random::<f64>() - 0.5);
        y.push(c);
    }
    let wsvm = fit_wsvm(&x, &y, &names(2), &WsvmConfig::default()).map_err(err)?.with_thresholds(0.0, 0.0);
    let views = vec![ScenarioScores(vec![0.95, 0.05]); 8];

    let bonus = |r: usize, psi: f64| if r == 0 { 0.0 } else { (r as f64).powf(psi) };
    let mut checked = 0;
    for psi in [0.0, 1.5] {
        let spec = RewardSpec::with_psi(psi);
        for label in [Some(0), Some(1), None] {
            for r in 0..=7 {
                let mut ep = SceneEpisode::new(views.clone(), label, 0, &wsvm).map_err(err)?;
                ensure(ep.current_prediction() == Some(0), || "fixture scene is not class 0".into())?;
                let correct = label == Some(0);
                for _ in 0..7 - r {
                    let out = env_step(&mut ep, Action::MoveNearestUnseen, &wsvm, &spec).map_err(err)?;
                    let want = if correct { -1.0 } else { 0.0 };
                    ensure(out.reward == want, || format!("move reward {} for {label:?}", out.reward))?;
                    checked += 1;
                }
                ensure(ep.remaining() == r, || format!("{} views remain, wanted {r}", ep.remaining()))?;

                let predict = if correct { 8.0 + bonus(r, psi) } else { -8.0 };
                let reject = match label {
                    None => 8.0 + bonus(r, psi),
                    _ if correct => -8.0,
                    _ => 0.0,
                };
                for (action, want) in [(Action::Predict, predict), (Action::RejectAndEnd, reject)] {
                    let got = env_step(&mut ep.clone(), action, &wsvm, &spec).map_err(err)?.reward;
                    ensure(close(got, want, 1e-12), || {
                        format!("{action:?} psi {psi} label {label:?} remaining {r}: {got} != {want}")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    let top = RewardSpec::with_psi(1.5).correct(3);
    ensure(close(top, 13.196152422706632, 1e-9), || format!("8 + 3^1.5 = {top}"))?;
    Ok(format!("{checked} rewards match the table"))
}

// ---------------------------------------------------------- experiments

fn config(text: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::from_toml(text).map_err(err)
}

fn active_exploration() -> Outcome {
    let report = run_active_trials(&config(ACTIVE)?).map_err(err)?;
    let (m0, m15) = (report.mean_actions(0.0), report.mean_actions(1.5));
    let (a0, a15) = (report.known_accuracy(0.0), report.known_accuracy(1.5));
    let detail = format!("actions {m0:.2} vs {m15:.2}, known accuracy {a0:.3} vs {a15:.3}");
    ensure(m0 - m15 >= 1.0 && (a0 - a15).abs() <= 0.1, || detail.clone())?;
    Ok(detail)
}

fn dynamic_dictionary() -> Outcome {
    let report = run_dynamic_comparison(&config(DYNAMIC)?).map_err(err)?;
    let n = report.trials.len() as f64;
    let mean = |f: fn(&scenario_core::harness::DynamicTrial) -> f64| report.trials.iter().map(f).sum::<f64>() / n;
    let ratio = mean(|t| t.dynamic_error) / mean(|t| t.static_error);
    let gap = mean(|t| t.dynamic_all) - mean(|t| t.static_all);
    let detail = format!("error ratio {ratio:.3}, all-view accuracy gap {gap:+.3}");
    ensure(ratio <= 1.5 && gap.abs() <= 0.05, || detail.clone())?;
    Ok(detail)
}

fn closed_set_objects() -> Outcome {
    use scenario_core::harness::experiments::{GT_OBJECTS, PRED_OBJECTS};
    let report = run_closed_set(&config(CLOSED)?).map_err(err)?;
    let gt = report.method(GT_OBJECTS);
    let pred = report.method(PRED_OBJECTS);
    ensure(!gt.is_empty() && gt.len() == pred.len(), || "missing object rows".into())?;
    let mut parts = Vec::new();
    for (g, p) in gt.iter().zip(&pred) {
        parts.push(format!("{:.3}/{:.3}", g.single_view_accuracy, p.single_view_accuracy));
        ensure(g.single_view_accuracy >= p.single_view_accuracy, || {
            format!("trial {}: ground truth {:.3} < predicted {:.3}", g.trial, g.single_view_accuracy, p.single_view_accuracy)
        })?;
    }
    Ok(format!("single-view truth/predicted {}", parts.join(" ")))
}

fn open_set_rates() -> Outcome {
    let report = run_open_set_trials(&config(OPEN)?).map_err(err)?;
    let (acc, rec) = (report.mean_known_accuracy(), report.mean_unknown_recall());
    let detail = format!("known accuracy {acc:.3}, unknown recall {rec:.3}");
    ensure(acc >= 0.75 && rec >= 0.6, || detail.clone())?;
    Ok(detail)
}

fn run_cli(config: &Path, out: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_scenario"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(["--seed", "7", "--trials", "2"])
        .output()
        .map_err(err)?;
    ensure(status.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr))
    })
}

fn reproducible_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("config.toml");
    std::fs::write(&config, CLOSED).map_err(err)?;
    let runs = [dir.path().join("a"), dir.path().join("b")];
    let commands: [&[&str]; 3] = [&["factorize"], &["detect-eval"], &["eval-closed"]];
    for out in &runs {
        for cmd in commands {
            run_cli(&config, out, cmd)?;
        }
    }
    let mut compared = 0;
    for name in ["scenarios.csv", "detector_ap.csv", "closed_set.csv"] {
        let read = |p: &Path| std::fs::read_to_string(p.join(name)).map_err(err);
        let (a, b) = (read(&runs[0])?, read(&runs[1])?);
        ensure(csv_body(&a) == csv_body(&b) && !csv_body(&a).is_empty(), || format!("{name} differs between runs"))?;
        compared += 1;
    }
    Ok(format!("{compared} CSV outputs identical across two runs"))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 14] = [
        ("idf_weights", idf_weights),
        ("objective_fixtures", objective_fixtures),
        ("monotone_descent", monotone_descent),
        ("planted_recovery", planted_recovery),
        ("weibull_fit", weibull_fit),
        ("wsvm_argmax", wsvm_argmax),
        ("svm_optimality", svm_optimality),
        ("fusion_algebra", fusion_algebra),
        ("reward_table", reward_table),
        ("active_exploration", active_exploration),
        ("dynamic_dictionary", dynamic_dictionary),
        ("closed_set_objects", closed_set_objects),
        ("open_set_rates", open_set_rates),
        ("reproducible_cli", reproducible_cli),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name:<20} {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name:<20} {detail} ({secs:.1}s)");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
