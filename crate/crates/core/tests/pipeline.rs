use ndarray::{s, Axis};
use scenario_core::dataset::{generate_corpus, persist_corpus, read_corpus, GeneratorSpec};
use scenario_core::harness::pipeline::load_corpus;
use scenario_core::harness::{prepare_open_set, ExperimentConfig};
use scenario_core::pbmf::{dynamic_extend, pbmf_fit, PbmfConfig, Provenance, ScenarioDictionary};

fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        r#"
seed = 3
trials = 1
[corpus]
scenes_per_class = 16
[corpus.plan]
num_classes = 6
vocabulary_size = 60
[split]
train = 10
val = 3
test = 3
[pbmf]
k = 12
max_iters = 100
restarts = 1
"#,
    )
    .unwrap()
}

fn spec(seed: u64) -> GeneratorSpec {
    let vocab: Vec<String> = (0..24).map(|i| format!("o{i:02}")).collect();
    let template = |t: usize| vocab[6 * t..6 * t + 6].to_vec();
    GeneratorSpec {
        num_classes: 3,
        scenes_per_class: 6,
        views_per_scene: 4,
        object_vocabulary: vocab.clone(),
        class_names: vec!["a".into(), "b".into(), "c".into()],
        class_scenario_templates: vec![
            vec![template(0), template(1)],
            vec![template(1), template(2)],
            vec![template(3), template(0)],
        ],
        scenario_presence_rate: 0.7,
        object_dropout_rate: 0.0,
        distractor_rate: 0.0,
        adversarial_view_rate: 0.0,
        seed,
    }
}

#[test]
fn persisted_corpus_reads_back_identically() {
    let corpus = generate_corpus(&spec(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    persist_corpus(&corpus, dir.path()).unwrap();
    let back = read_corpus(dir.path()).unwrap();
    assert_eq!(back.view_matrix(), corpus.view_matrix());
    assert_eq!(back.class_names, corpus.class_names);
    let labels = |c: &scenario_core::dataset::Corpus| c.scenes.iter().map(|s| s.class_label).collect::<Vec<_>>();
    assert_eq!(labels(&back), labels(&corpus));
}

#[test]
fn extension_keeps_the_old_scenarios() {
    let corpus = generate_corpus(&spec(2)).unwrap();
    let of = |c: usize| corpus.with_scenes(corpus.scenes.iter().filter(|s| s.class_label == c).cloned().collect());
    let old = corpus.with_scenes(corpus.scenes.iter().filter(|s| s.class_label < 2).cloned().collect());
    let cfg = PbmfConfig { k: 3, restarts: 1, ..PbmfConfig::default() };
    let fit = pbmf_fit(&old.view_matrix(), &cfg).unwrap();
    let dict = ScenarioDictionary::new(fit.w.clone(), corpus.object_vocabulary.clone(), Provenance::Initial);

    let ext = dynamic_extend(&dict, &of(2).view_matrix(), 2, &PbmfConfig { k: 2, ..cfg }).unwrap();
    let k_old = dict.num_scenarios();
    assert_eq!(ext.dictionary.num_scenarios(), k_old + ext.appended);
    assert_eq!(ext.dictionary.w.slice(s![.., ..k_old]), fit.w);
    assert_eq!(ext.h.len_of(Axis(0)), ext.dictionary.num_scenarios());
    // Template 3 only occurs in the new class, so something must be appended.
    assert!(ext.appended >= 1);
}

#[test]
fn open_set_setup_is_deterministic_with_disjoint_classes() {
    let cfg = small_config();
    let corpus = load_corpus(&cfg, cfg.seed).unwrap();
    let a = prepare_open_set(&cfg, &corpus, 0).unwrap();
    let b = prepare_open_set(&cfg, &corpus, 0).unwrap();

    let p = &a.partition;
    assert!(p.known.iter().all(|c| !p.unknown.contains(c)));
    assert_eq!(p.known.len() + p.unknown.len(), corpus.class_names.len());
    assert_eq!(a.class_names.len(), p.known.len());
    assert!((0.0..=1.0).contains(&a.selection.delta_o));
    assert!((0.0..=1.0).contains(&a.selection.delta_r));

    assert_eq!(a.partition, b.partition);
    assert_eq!(a.wsvm.to_json().unwrap(), b.wsvm.to_json().unwrap());
    assert_eq!(a.test_scores, b.test_scores);
}
