//! Synthetic multi-view scene corpora.
//!
//! Each scene class owns a few planted scenarios (object subsets). A view
//! of a scene shows the union of a random subset of its class scenarios,
//! then object dropout, distractor objects, and whole-view substitution
//! from another class are applied. Because the generator knows which
//! scenarios it planted, factorization quality can be checked against
//! ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from;

pub const DEFAULT_VIEWS_PER_SCENE: usize = 8;
/// Objects seen in fewer views than this are dropped by [`Corpus::filter_rare_objects`].
pub const DEFAULT_MIN_OBJECT_VIEWS: usize = 5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("class `{class}` has {available} scenes, split needs {needed}")]
    InsufficientScenes {
        class: String,
        available: usize,
        needed: usize,
    },
    #[error("{file}:{line}: field `{field}`: {message}")]
    Parse {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Full description of a synthetic corpus; the corpus is a pure function of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub num_classes: usize,
    pub scenes_per_class: usize,
    pub views_per_scene: usize,
    pub object_vocabulary: Vec<String>,
    pub class_names: Vec<String>,
    /// Per class, the planted scenarios as lists of object names.
    pub class_scenario_templates: Vec<Vec<Vec<String>>>,
    /// Probability that a given class scenario is visible in a view.
    /// At 1.0 every view shows all of its class scenarios.
    pub scenario_presence_rate: f64,
    pub object_dropout_rate: f64,
    pub distractor_rate: f64,
    pub adversarial_view_rate: f64,
    pub seed: u64,
}

/// Recipe for random planted templates over a synthetic vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplatePlan {
    pub num_classes: usize,
    pub vocabulary_size: usize,
    pub min_scenarios_per_class: usize,
    pub max_scenarios_per_class: usize,
    pub min_objects_per_scenario: usize,
    pub max_objects_per_scenario: usize,
    /// Probability an object slot reuses an object already used by another class.
    pub overlap_rate: f64,
    pub seed: u64,
}

impl Default for TemplatePlan {
    fn default() -> Self {
        Self {
            num_classes: 14,
            vocabulary_size: 201,
            min_scenarios_per_class: 2,
            max_scenarios_per_class: 4,
            min_objects_per_scenario: 3,
            max_objects_per_scenario: 8,
            overlap_rate: 0.2,
            seed: 0,
        }
    }
}

impl TemplatePlan {
    /// Returns `(vocabulary, per-class templates)`.
    pub fn build(&self) -> Result<(Vec<String>, Vec<Vec<Vec<String>>>)> {
        if self.num_classes == 0 || self.vocabulary_size == 0 {
            return Err(DatasetError::InvalidSpec(
                "template plan needs at least one class and one object".into(),
            ));
        }
        if self.min_scenarios_per_class == 0
            || self.min_scenarios_per_class > self.max_scenarios_per_class
            || self.min_objects_per_scenario == 0
            || self.min_objects_per_scenario > self.max_objects_per_scenario
        {
            return Err(DatasetError::InvalidSpec(
                "template plan ranges must be nonempty and start at >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap_rate) {
            return Err(DatasetError::InvalidSpec("overlap_rate outside [0,1]".into()));
        }
        let m = self.vocabulary_size;
        let vocab: Vec<String> = (0..m).map(|i| format!("obj_{i:03}")).collect();
        let mut rng = rng_from(self.seed, &[0x7e37]);
        let mut fresh: Vec<usize> = (0..m).collect();
        fresh.shuffle(&mut rng);
        let mut fresh = fresh.into_iter();
        let mut owner: Vec<Option<usize>> = vec![None; m];

        let mut templates = Vec::with_capacity(self.num_classes);
        for class in 0..self.num_classes {
            let n_scen =
                rng.random_range(self.min_scenarios_per_class..=self.max_scenarios_per_class);
            let mut class_templates = Vec::with_capacity(n_scen);
            for _ in 0..n_scen {
                let size = rng
                    .random_range(self.min_objects_per_scenario..=self.max_objects_per_scenario)
                    .min(m);
                let mut members = BTreeSet::new();
                let mut guard = 0;
                while members.len() < size && guard < 50 * size {
                    guard += 1;
                    let foreign: Vec<usize> = (0..m)
                        .filter(|&o| matches!(owner[o], Some(c) if c != class))
                        .collect();
                    let pick = if !foreign.is_empty() && rng.random::<f64>() < self.overlap_rate {
                        foreign[rng.random_range(0..foreign.len())]
                    } else if let Some(o) = fresh.next() {
                        o
                    } else {
                        rng.random_range(0..m)
                    };
                    members.insert(pick);
                }
                for &o in &members {
                    owner[o].get_or_insert(class);
                }
                class_templates.push(members.into_iter().map(|o| vocab[o].clone()).collect());
            }
            templates.push(class_templates);
        }
        Ok((vocab, templates))
    }
}

/// Noise levels applied on top of the planted templates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseRates {
    pub scenario_presence_rate: f64,
    pub object_dropout_rate: f64,
    pub distractor_rate: f64,
    pub adversarial_view_rate: f64,
}

impl Default for NoiseRates {
    fn default() -> Self {
        Self {
            scenario_presence_rate: 0.6,
            object_dropout_rate: 0.1,
            distractor_rate: 0.2,
            adversarial_view_rate: 0.05,
        }
    }
}

impl NoiseRates {
    pub fn noiseless() -> Self {
        Self {
            scenario_presence_rate: 1.0,
            object_dropout_rate: 0.0,
            distractor_rate: 0.0,
            adversarial_view_rate: 0.0,
        }
    }
}

impl GeneratorSpec {
    pub fn from_plan(
        plan: &TemplatePlan,
        scenes_per_class: usize,
        views_per_scene: usize,
        noise: NoiseRates,
        seed: u64,
    ) -> Result<Self> {
        let (vocab, templates) = plan.build()?;
        Ok(Self {
            num_classes: plan.num_classes,
            scenes_per_class,
            views_per_scene,
            object_vocabulary: vocab,
            class_names: (0..plan.num_classes).map(|c| format!("class_{c:02}")).collect(),
            class_scenario_templates: templates,
            scenario_presence_rate: noise.scenario_presence_rate,
            object_dropout_rate: noise.object_dropout_rate,
            distractor_rate: noise.distractor_rate,
            adversarial_view_rate: noise.adversarial_view_rate,
            seed,
        })
    }

    /// 14 classes, 35 scenes of 8 views each, 201 objects.
    pub fn full_scale(seed: u64) -> Self {
        let plan = TemplatePlan {
            seed,
            ..TemplatePlan::default()
        };
        Self::from_plan(&plan, 35, DEFAULT_VIEWS_PER_SCENE, NoiseRates::default(), seed)
            .expect("default plan is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DatasetError::InvalidSpec(msg.to_string()));
        if self.object_vocabulary.is_empty() {
            return bad("empty object vocabulary");
        }
        if self.views_per_scene == 0 {
            return bad("views_per_scene must be >= 1");
        }
        if self.class_scenario_templates.len() != self.num_classes {
            return bad("one template list per class is required");
        }
        if self.class_names.len() != self.num_classes {
            return bad("one class name per class is required");
        }
        for (name, rate) in [
            ("scenario_presence_rate", self.scenario_presence_rate),
            ("object_dropout_rate", self.object_dropout_rate),
            ("distractor_rate", self.distractor_rate),
            ("adversarial_view_rate", self.adversarial_view_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(DatasetError::InvalidSpec(format!("{name} = {rate} outside [0,1]")));
            }
        }
        let known: BTreeSet<&str> = self.object_vocabulary.iter().map(String::as_str).collect();
        if known.len() != self.object_vocabulary.len() {
            return bad("duplicate object names in vocabulary");
        }
        for (c, templates) in self.class_scenario_templates.iter().enumerate() {
            if templates.is_empty() || templates.iter().any(Vec::is_empty) {
                return Err(DatasetError::InvalidSpec(format!(
                    "class {} has an empty template set or an empty template",
                    self.class_names[c]
                )));
            }
            for obj in templates.iter().flatten() {
                if !known.contains(obj.as_str()) {
                    return Err(DatasetError::InvalidSpec(format!(
                        "template object `{obj}` not in vocabulary"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewObservation {
    pub view_index: usize,
    /// 0/1 per vocabulary entry.
    pub object_presence: Vec<u8>,
}

/// A scene as stored in a corpus: label plus its views in ring order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: usize,
    pub class_label: usize,
    pub views: Vec<ViewObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub object_vocabulary: Vec<String>,
    pub class_names: Vec<String>,
    pub scenes: Vec<Scene>,
    pub spec: Option<GeneratorSpec>,
}

/// Ground truth factors: `A = min(W H, 1)` holds exactly when no object
/// noise was applied.
#[derive(Debug, Clone)]
pub struct PlantedFactors {
    /// Objects x templates, templates enumerated class by class.
    pub w: Array2<f64>,
    /// Templates x views, columns in corpus view order.
    pub h: Array2<f64>,
    /// Class owning each template column.
    pub template_class: Vec<usize>,
}

pub fn generate_corpus(spec: &GeneratorSpec) -> Result<Corpus> {
    generate_with_truth(spec).map(|(c, _)| c)
}

pub fn generate_with_truth(spec: &GeneratorSpec) -> Result<(Corpus, PlantedFactors)> {
    spec.validate()?;
    let m = spec.object_vocabulary.len();
    let index: HashMap<&str, usize> = spec
        .object_vocabulary
        .iter()
        .enumerate()
        .map(|(i, o)| (o.as_str(), i))
        .collect();

    // Resolve templates to object indices and global template ids.
    let mut template_class = Vec::new();
    let mut class_templates: Vec<Vec<(usize, Vec<usize>)>> = Vec::with_capacity(spec.num_classes);
    for (c, templates) in spec.class_scenario_templates.iter().enumerate() {
        let mut resolved = Vec::new();
        for t in templates {
            let mut objs: Vec<usize> = t.iter().map(|o| index[o.as_str()]).collect();
            objs.sort_unstable();
            objs.dedup();
            resolved.push((template_class.len(), objs));
            template_class.push(c);
        }
        class_templates.push(resolved);
    }
    let class_union: Vec<BTreeSet<usize>> = class_templates
        .iter()
        .map(|ts| ts.iter().flat_map(|(_, o)| o.iter().copied()).collect())
        .collect();
    let foreign: Vec<Vec<usize>> = class_union
        .iter()
        .map(|u| (0..m).filter(|o| !u.contains(o)).collect())
        .collect();

    let n_templates = template_class.len();
    let total_views = spec.num_classes * spec.scenes_per_class * spec.views_per_scene;
    let mut w = Array2::<f64>::zeros((m, n_templates));
    for ts in &class_templates {
        for (t, objs) in ts {
            for &o in objs {
                w[[o, *t]] = 1.0;
            }
        }
    }
    let mut h = Array2::<f64>::zeros((n_templates, total_views));

    let mut rng = rng_from(spec.seed, &[0xc0_4905]);
    let mut scenes = Vec::with_capacity(spec.num_classes * spec.scenes_per_class);
    let mut col = 0;
    for class in 0..spec.num_classes {
        for _ in 0..spec.scenes_per_class {
            let scene_id = scenes.len();
            let mut views = Vec::with_capacity(spec.views_per_scene);
            for view_index in 0..spec.views_per_scene {
                let source = if spec.num_classes > 1 && rng.random::<f64>() < spec.adversarial_view_rate
                {
                    let other = rng.random_range(0..spec.num_classes - 1);
                    if other >= class {
                        other + 1
                    } else {
                        other
                    }
                } else {
                    class
                };
                let templates = &class_templates[source];
                let mut visible: Vec<usize> = (0..templates.len())
                    .filter(|_| rng.random::<f64>() < spec.scenario_presence_rate)
                    .collect();
                if visible.is_empty() {
                    visible.push(rng.random_range(0..templates.len()));
                }
                let mut presence = vec![0u8; m];
                for &t in &visible {
                    let (tid, objs) = &templates[t];
                    h[[*tid, col]] = 1.0;
                    for &o in objs {
                        presence[o] = 1;
                    }
                }
                for p in presence.iter_mut().filter(|p| **p == 1) {
                    if rng.random::<f64>() < spec.object_dropout_rate {
                        *p = 0;
                    }
                }
                if rng.random::<f64>() < spec.distractor_rate && !foreign[source].is_empty() {
                    let f = &foreign[source];
                    presence[f[rng.random_range(0..f.len())]] = 1;
                }
                views.push(ViewObservation {
                    view_index,
                    object_presence: presence,
                });
                col += 1;
            }
            scenes.push(Scene {
                scene_id,
                class_label: class,
                views,
            });
        }
    }

    let corpus = Corpus {
        object_vocabulary: spec.object_vocabulary.clone(),
        class_names: spec.class_names.clone(),
        scenes,
        spec: Some(spec.clone()),
    };
    Ok((
        corpus,
        PlantedFactors {
            w,
            h,
            template_class,
        },
    ))
}

/// Per-class scene counts for a stratified split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 20,
            val: 5,
            test: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

/// Splits at scene granularity, stratified by class.
pub fn split_corpus(corpus: &Corpus, split: &SplitSpec) -> Result<CorpusSplit> {
    let needed = split.train + split.val + split.test;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.scenes.iter().enumerate() {
        by_class.entry(s.class_label).or_default().push(i);
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (&class, members) in &by_class {
        if members.len() < needed {
            return Err(DatasetError::InsufficientScenes {
                class: corpus
                    .class_names
                    .get(class)
                    .cloned()
                    .unwrap_or_else(|| class.to_string()),
                available: members.len(),
                needed,
            });
        }
        let mut order = members.clone();
        order.shuffle(&mut rng_from(split.seed, &[0x5b11, class as u64]));
        parts[0].extend_from_slice(&order[..split.train]);
        parts[1].extend_from_slice(&order[split.train..split.train + split.val]);
        parts[2].extend_from_slice(&order[split.train + split.val..needed]);
    }
    let [train, val, test] = parts.map(|mut idx| {
        idx.sort_unstable_by_key(|&i| corpus.scenes[i].scene_id);
        corpus.with_scenes(idx.iter().map(|&i| corpus.scenes[i].clone()).collect())
    });
    Ok(CorpusSplit { train, val, test })
}

impl Corpus {
    pub fn num_objects(&self) -> usize {
        self.object_vocabulary.len()
    }

    pub fn num_views(&self) -> usize {
        self.scenes.iter().map(|s| s.views.len()).sum()
    }

    pub fn with_scenes(&self, scenes: Vec<Scene>) -> Corpus {
        Corpus {
            object_vocabulary: self.object_vocabulary.clone(),
            class_names: self.class_names.clone(),
            scenes,
            spec: self.spec.clone(),
        }
    }

    /// Scenes whose label is in `classes`, labels untouched.
    pub fn restrict_to_classes(&self, classes: &[usize]) -> Corpus {
        self.with_scenes(
            self.scenes
                .iter()
                .filter(|s| classes.contains(&s.class_label))
                .cloned()
                .collect(),
        )
    }

    /// Objects x views presence matrix, columns in scene-then-view order.
    pub fn view_matrix(&self) -> Array2<f64> {
        let m = self.num_objects();
        let mut a = Array2::zeros((m, self.num_views()));
        for (j, view) in self.scenes.iter().flat_map(|s| s.views.iter()).enumerate() {
            for (i, &p) in view.object_presence.iter().enumerate() {
                a[[i, j]] = f64::from(p);
            }
        }
        a
    }

    /// Class label of every column of [`Corpus::view_matrix`].
    pub fn view_labels(&self) -> Vec<usize> {
        self.scenes
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.class_label, s.views.len()))
            .collect()
    }

    /// Drops objects present in fewer than `min_views` views.
    pub fn filter_rare_objects(&self, min_views: usize) -> Corpus {
        let m = self.num_objects();
        let mut counts = vec![0usize; m];
        for v in self.scenes.iter().flat_map(|s| &s.views) {
            for (c, &p) in counts.iter_mut().zip(&v.object_presence) {
                *c += usize::from(p);
            }
        }
        let keep: Vec<usize> = (0..m).filter(|&i| counts[i] >= min_views).collect();
        let scenes = self
            .scenes
            .iter()
            .map(|s| Scene {
                scene_id: s.scene_id,
                class_label: s.class_label,
                views: s
                    .views
                    .iter()
                    .map(|v| ViewObservation {
                        view_index: v.view_index,
                        object_presence: keep.iter().map(|&i| v.object_presence[i]).collect(),
                    })
                    .collect(),
            })
            .collect();
        Corpus {
            object_vocabulary: keep.iter().map(|&i| self.object_vocabulary[i].clone()).collect(),
            class_names: self.class_names.clone(),
            scenes,
            spec: self.spec.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusMeta {
    class_names: Vec<String>,
    generator: Option<GeneratorSpec>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `vocab.txt`, `views.csv` and `meta.json` into `dir`.
pub fn persist_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut vocab = String::new();
    for o in &corpus.object_vocabulary {
        vocab.push_str(o);
        vocab.push('\n');
    }
    let vocab_path = dir.join("vocab.txt");
    fs::write(&vocab_path, vocab).map_err(io_err(&vocab_path))?;

    let mut csv = String::from("scene_id,class,view_index");
    for i in 0..corpus.num_objects() {
        let _ = write!(csv, ",obj_{i}");
    }
    csv.push('\n');
    for s in &corpus.scenes {
        for v in &s.views {
            let _ = write!(csv, "{},{},{}", s.scene_id, corpus.class_names[s.class_label], v.view_index);
            for &p in &v.object_presence {
                csv.push(',');
                csv.push(if p == 1 { '1' } else { '0' });
            }
            csv.push('\n');
        }
    }
    let views_path = dir.join("views.csv");
    fs::write(&views_path, csv).map_err(io_err(&views_path))?;

    let meta = CorpusMeta {
        class_names: corpus.class_names.clone(),
        generator: corpus.spec.clone(),
    };
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&meta_path, text).map_err(io_err(&meta_path))?;
    Ok(())
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let vocab_path = dir.join("vocab.txt");
    let vocab: Vec<String> = fs::read_to_string(&vocab_path)
        .map_err(io_err(&vocab_path))?
        .lines()
        .map(str::to_string)
        .collect();

    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: CorpusMeta = serde_json::from_str(&meta_text).map_err(|e| DatasetError::Parse {
        file: "meta.json".into(),
        line: e.line(),
        field: "meta".into(),
        message: e.to_string(),
    })?;
    let class_index: HashMap<&str, usize> = meta
        .class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let views_path = dir.join("views.csv");
    let text = fs::read_to_string(&views_path).map_err(io_err(&views_path))?;
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, field: &str, message: String| DatasetError::Parse {
        file: "views.csv".into(),
        line,
        field: field.to_string(),
        message,
    };
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "header", "missing header".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let expected_cols = 3 + vocab.len();
    if columns.len() != expected_cols {
        return Err(DatasetError::VocabularyMismatch(format!(
            "views.csv has {} object columns, vocab.txt has {} objects",
            columns.len().saturating_sub(3),
            vocab.len()
        )));
    }
    let fixed = ["scene_id", "class", "view_index"];
    for (i, col) in columns.iter().enumerate() {
        let want = if i < 3 {
            fixed[i].to_string()
        } else {
            format!("obj_{}", i - 3)
        };
        if *col != want {
            return Err(parse_err(1, col, format!("expected header column `{want}`")));
        }
    }

    let mut scenes: Vec<Scene> = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    for (ln, line) in lines {
        let line_no = ln + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected_cols {
            return Err(parse_err(
                line_no,
                "row",
                format!("expected {expected_cols} cells, found {}", cells.len()),
            ));
        }
        let scene_id: usize = cells[0]
            .parse()
            .map_err(|_| parse_err(line_no, "scene_id", format!("not an integer: `{}`", cells[0])))?;
        let class = *class_index
            .get(cells[1])
            .ok_or_else(|| parse_err(line_no, "class", format!("unknown class `{}`", cells[1])))?;
        let view_index: usize = cells[2].parse().map_err(|_| {
            parse_err(line_no, "view_index", format!("not an integer: `{}`", cells[2]))
        })?;
        let mut presence = Vec::with_capacity(vocab.len());
        for (i, cell) in cells[3..].iter().enumerate() {
            presence.push(match *cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(parse_err(
                        line_no,
                        &format!("obj_{i}"),
                        format!("presence must be 0 or 1, found `{other}`"),
                    ))
                }
            });
        }
        let idx = *pos.entry(scene_id).or_insert_with(|| {
            scenes.push(Scene {
                scene_id,
                class_label: class,
                views: Vec::new(),
            });
            scenes.len() - 1
        });
        if scenes[idx].class_label != class {
            return Err(parse_err(line_no, "class", format!("scene {scene_id} changes class")));
        }
        scenes[idx].views.push(ViewObservation {
            view_index,
            object_presence: presence,
        });
    }

    Ok(Corpus {
        object_vocabulary: vocab,
        class_names: meta.class_names,
        scenes,
        spec: meta.generator,
    })
}

/// Reads a corpus that must share `vocabulary` (same names, same order).
pub fn read_corpus_with_vocabulary(dir: &Path, vocabulary: &[String]) -> Result<Corpus> {
    let corpus = read_corpus(dir)?;
    if corpus.object_vocabulary != vocabulary {
        let first = corpus
            .object_vocabulary
            .iter()
            .zip(vocabulary)
            .position(|(a, b)| a != b)
            .unwrap_or(corpus.object_vocabulary.len().min(vocabulary.len()));
        return Err(DatasetError::VocabularyMismatch(format!(
            "corpus has {} objects, session has {}; first difference at row {first}",
            corpus.object_vocabulary.len(),
            vocabulary.len()
        )));
    }
    Ok(corpus)
}
