use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scenario_core::agent::{train_policy, QConfig, RewardSpec, TrainingScene};
use scenario_core::dataset::{persist_corpus, split_corpus, SplitSpec};
use scenario_core::detector::{evaluate_detector, DetectorSpec};
use scenario_core::fusion::fuse_subset;
use scenario_core::harness::pipeline::{
    build_detector, learn_dictionary, load_corpus, reference_weights, score_scenes,
    subset_training_set,
};
use scenario_core::harness::report::{fmt_f64, fmt_opt};
use scenario_core::harness::{
    prepare_open_set, run_active_trials, run_closed_set, run_dynamic_comparison,
    run_open_set_trials, CsvTable, ExperimentConfig, ReportHeader,
};
use scenario_core::openset::{explain_prediction, fit_logistic};
use scenario_core::rng::{derive_seed, rng_from};

#[derive(Parser)]
#[command(name = "scenario", version, about = "Scenario dictionaries, open-set scene classification and active exploration")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or re-read) the corpus and persist it.
    Gen,
    /// Learn a scenario dictionary on the training split.
    Factorize,
    /// Average precision of the configured scenario detector on the test split.
    DetectEval,
    /// Fit and calibrate the open-set classifier for trial 0.
    TrainOpenset,
    /// Train one exploration policy per psi for trial 0.
    TrainAgent,
    /// Closed-set accuracy of object and scenario features.
    EvalClosed,
    /// Open-set known accuracy and unknown precision/recall per trial.
    EvalOpen,
    /// Static versus class-by-class dictionaries.
    EvalDynamic,
    /// Exploration policies for every configured psi.
    EvalActive,
    /// Influence report for one test scene.
    Explain {
        #[arg(long)]
        scene: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(cfg: &ExperimentConfig, name: &str, table: &CsvTable) -> Result<PathBuf> {
    let path = cfg.out_dir.join(name);
    table.write(&path, &ReportHeader::new(cfg.hash(), cfg.seed))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn split(cfg: &ExperimentConfig, corpus: &scenario_core::dataset::Corpus) -> Result<scenario_core::dataset::CorpusSplit> {
    let spec = SplitSpec {
        seed: derive_seed(cfg.seed, &[0x5]),
        ..cfg.split
    };
    Ok(split_corpus(corpus, &spec)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Gen => {
            let corpus = load_corpus(&cfg, cfg.seed)?;
            let dir = cfg.out_dir.join("corpus");
            persist_corpus(&corpus, &dir)?;
            let mut t = CsvTable::new(&["class", "scenes", "views"]);
            for (c, name) in corpus.class_names.iter().enumerate() {
                let scenes: Vec<_> = corpus.scenes.iter().filter(|s| s.class_label == c).collect();
                let views: usize = scenes.iter().map(|s| s.views.len()).sum();
                t.push(vec![name.clone(), scenes.len().to_string(), views.to_string()]);
            }
            write(&cfg, "corpus_summary.csv", &t)?;
            println!("wrote {}", dir.display());
        }
        Command::Factorize => {
            let corpus = load_corpus(&cfg, cfg.seed)?;
            let sp = split(&cfg, &corpus)?;
            let pbmf = scenario_core::pbmf::PbmfConfig {
                seed: derive_seed(cfg.seed, &[0x9b]),
                ..cfg.pbmf.clone()
            };
            let dict = learn_dictionary(&sp.train.view_matrix(), &corpus.object_vocabulary, &pbmf)?;
            let mut t = CsvTable::new(&["scenario", "members"]);
            for (j, m) in dict.binarized().members().iter().enumerate() {
                t.push(vec![j.to_string(), m.join(" ")]);
            }
            write(&cfg, "scenarios.csv", &t)?;
            let json = serde_json::to_string(&dict)?;
            write_text(&cfg.out_dir.join("dictionary.json"), &json)?;
        }
        Command::DetectEval => {
            let corpus = load_corpus(&cfg, cfg.seed)?;
            let sp = split(&cfg, &corpus)?;
            let a = sp.train.view_matrix();
            let pbmf = scenario_core::pbmf::PbmfConfig {
                seed: derive_seed(cfg.seed, &[0x9b]),
                ..cfg.pbmf.clone()
            };
            let dict = learn_dictionary(&a, &corpus.object_vocabulary, &pbmf)?;
            let reference = reference_weights(&a);
            let oracle = build_detector(&dict, &DetectorSpec::oracle(), &reference)?;
            let spec = DetectorSpec {
                seed: derive_seed(cfg.seed, &[0xde]),
                ..cfg.detector.clone()
            };
            let det = build_detector(&dict, &spec, &reference)?;
            let truth = oracle.truth_matrix(&sp.test.view_matrix())?;
            let report = evaluate_detector(&det, &sp.test, &truth)?;
            let mut t = CsvTable::new(&["scenario", "positives", "average_precision"]);
            for (j, (ap, pos)) in report.ap.iter().zip(&report.positives).enumerate() {
                t.push(vec![j.to_string(), pos.to_string(), fmt_opt(*ap)]);
            }
            t.push(vec!["mean".into(), report.undefined.to_string(), fmt_opt(report.mean_ap)]);
            write(&cfg, "detector_ap.csv", &t)?;
        }
        Command::TrainOpenset => {
            let corpus = load_corpus(&cfg, cfg.seed)?;
            let setup = prepare_open_set(&cfg, &corpus, 0)?;
            let mut t = CsvTable::new(&["delta_o", "delta_r", "known_accuracy", "unknown_recall", "harmonic_mean"]);
            let s = &setup.selection;
            t.push(vec![
                fmt_f64(s.delta_o),
                fmt_f64(s.delta_r),
                fmt_f64(s.known_accuracy),
                fmt_f64(s.unknown_recall),
                fmt_f64(s.harmonic_mean),
            ]);
            write(&cfg, "openset_thresholds.csv", &t)?;
            setup.wsvm.save(&cfg.out_dir.join("wsvm.json"))?;
            println!("wrote {}", cfg.out_dir.join("wsvm.json").display());
        }
        Command::TrainAgent => {
            let corpus = load_corpus(&cfg, cfg.seed)?;
            let setup = prepare_open_set(&cfg, &corpus, 0)?;
            let known: Vec<TrainingScene> = setup
                .split
                .train
                .scenes
                .iter()
                .zip(&setup.train_scores)
                .filter_map(|(s, v)| {
                    setup.partition.index_of(s.class_label).map(|l| TrainingScene {
                        view_scores: v.clone(),
                        label: Some(l),
                    })
                })
                .collect();
            let unknown: Vec<TrainingScene> = setup
                .split
                .train
                .scenes
                .iter()
                .zip(&setup.train_scores)
                .filter(|(s, _)| setup.partition.index_of(s.class_label).is_none())
                .map(|(_, v)| TrainingScene { view_scores: v.clone(), label: None })
                .collect();
            for &psi in &cfg.agent.psi {
                let reward = RewardSpec { psi, ..cfg.agent.reward.clone() };
                let q = QConfig {
                    seed: derive_seed(cfg.seed, &[0x91]),
                    ..cfg.agent.q.clone()
                };
                let result = train_policy(&known, &unknown, &setup.wsvm, &reward, &q)?;
                let path = cfg.out_dir.join(format!("policy_psi{psi}.txt"));
                result.policy.save(&path)?;
                println!("wrote {}", path.display());
                let header = ReportHeader::new(cfg.hash(), cfg.seed);
                write_text(
                    &cfg.out_dir.join(format!("training_curve_psi{psi}.csv")),
                    &format!("{}\n{}", header.line(), result.curve_csv()),
                )?;
            }
        }
        Command::EvalClosed => {
            write(&cfg, "closed_set.csv", &run_closed_set(&cfg)?.to_table())?;
        }
        Command::EvalOpen => {
            write(&cfg, "open_set.csv", &run_open_set_trials(&cfg)?.to_table())?;
        }
        Command::EvalDynamic => {
            write(&cfg, "dynamic.csv", &run_dynamic_comparison(&cfg)?.to_table())?;
        }
        Command::EvalActive => {
            write(&cfg, "active.csv", &run_active_trials(&cfg)?.to_table())?;
        }
        Command::Explain { scene } => {
            let corpus = load_corpus(&cfg, cfg.seed)?;
            let sp = split(&cfg, &corpus)?;
            let Some(target) = sp.test.scenes.iter().find(|s| s.scene_id == scene) else {
                let ids: Vec<String> = sp.test.scenes.iter().take(10).map(|s| s.scene_id.to_string()).collect();
                bail!("scene {scene} is not in the test split (e.g. {})", ids.join(", "));
            };
            let a = sp.train.view_matrix();
            let pbmf = scenario_core::pbmf::PbmfConfig {
                seed: derive_seed(cfg.seed, &[0x9b]),
                ..cfg.pbmf.clone()
            };
            let dict = learn_dictionary(&a, &corpus.object_vocabulary, &pbmf)?;
            let spec = DetectorSpec {
                seed: derive_seed(cfg.seed, &[0xde]),
                ..cfg.detector.clone()
            };
            let det = build_detector(&dict, &spec, &reference_weights(&a))?;
            let train: Vec<_> = sp.train.scenes.iter().collect();
            let labels: Vec<usize> = train.iter().map(|s| s.class_label).collect();
            let scores = score_scenes(&det, &train)?;
            let mut rng = rng_from(cfg.seed, &[0x5c]);
            let (x, y) = subset_training_set(&scores, &labels, cfg.open_set.samples_per_scene, &mut rng)?;
            let model = fit_logistic(&x, &y, &cfg.logistic)?;
            let views = score_scenes(&det, &[target])?.remove(0);
            let all: Vec<usize> = (0..views.len()).collect();
            let fused = fuse_subset(&views, &all)?;
            let class = model.predict(&fused.scores);
            let weights = model.weights.row(class).to_vec();
            let mut t = CsvTable::new(&["rank", "scenario", "influence", "reportable", "members"]);
            for (rank, inf) in explain_prediction(&weights, &fused.scores, &dict.binarized())?.iter().enumerate() {
                t.push(vec![
                    rank.to_string(),
                    inf.scenario.to_string(),
                    fmt_f64(inf.influence),
                    inf.reportable.to_string(),
                    inf.members.join(" "),
                ]);
            }
            println!(
                "scene {scene}: predicted {} (true {})",
                corpus.class_names[class], corpus.class_names[target.class_label]
            );
            write(&cfg, &format!("explain_scene{scene}.csv"), &t)?;
        }
    }
    Ok(())
}
