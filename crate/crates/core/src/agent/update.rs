use ndarray::Array2;

use super::{AgentError, Result};
use crate::dataset::Scene;
use crate::detector::{make_detector, score_scene, Detector, DetectorSpec};
use crate::fusion::random_subset_features;
use crate::openset::{fit_wsvm, WsvmConfig, WsvmModel};
use crate::pbmf::{compute_idf_weights, dynamic_extend, PbmfConfig, ScenarioDictionary};
use crate::rng::rng_from;

/// Scenes of a newly confirmed class plus the known-class training scenes
/// the classifier is refit on.
#[derive(Debug, Clone)]
pub struct NewClassData {
    pub known_scenes: Vec<Scene>,
    /// Classifier index of each known scene.
    pub known_labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub new_scenes: Vec<Scene>,
    pub new_class_name: String,
    /// Fused random view subsets drawn per scene for the classifier.
    pub samples_per_scene: usize,
    pub seed: u64,
}

#[derive(Debug)]
pub struct ClassUpdate {
    pub dictionary: ScenarioDictionary,
    pub detector: Detector,
    pub wsvm: WsvmModel,
    /// Scenarios appended for the new class.
    pub appended: usize,
    pub class_names: Vec<String>,
}

pub const MIN_NEW_CLASS_SCENES: usize = 10;

fn presence_matrix<'a>(scenes: impl Iterator<Item = &'a Scene>, objects: usize) -> Array2<f64> {
    let cols: Vec<&[u8]> = scenes
        .flat_map(|s| s.views.iter().map(|v| v.object_presence.as_slice()))
        .collect();
    Array2::from_shape_fn((objects, cols.len()), |(i, j)| f64::from(cols[j][i]))
}

/// Extends the dictionary with scenarios of the new class, rebuilds the
/// detector over it and refits the W-SVM with the new class appended.
pub fn update_on_new_class(
    data: &NewClassData,
    dictionary: &ScenarioDictionary,
    detector_spec: &DetectorSpec,
    pbmf_config: &PbmfConfig,
    wsvm_config: &WsvmConfig,
) -> Result<ClassUpdate> {
    if data.new_scenes.len() < MIN_NEW_CLASS_SCENES {
        return Err(AgentError::InsufficientData {
            needed: MIN_NEW_CLASS_SCENES,
            found: data.new_scenes.len(),
        });
    }
    if data.known_scenes.len() != data.known_labels.len() {
        return Err(AgentError::Dimension {
            expected: data.known_scenes.len(),
            found: data.known_labels.len(),
        });
    }
    let objects = dictionary.num_objects();
    let class = data.class_names.len();
    let a_c = presence_matrix(data.new_scenes.iter(), objects);
    let ext = dynamic_extend(dictionary, &a_c, class, pbmf_config)?;

    let all = presence_matrix(data.known_scenes.iter().chain(&data.new_scenes), objects);
    let detector = make_detector(&ext.dictionary, detector_spec)?
        .with_reference(compute_idf_weights(&all));

    let mut rng = rng_from(data.seed, &[0x4e3, class as u64]);
    let scene_scores = data
        .known_scenes
        .iter()
        .chain(&data.new_scenes)
        .map(|s| score_scene(&detector, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let rows = random_subset_features(&scene_scores, data.samples_per_scene, &mut rng)?;
    let labels: Vec<usize> = data
        .known_labels
        .iter()
        .copied()
        .chain(std::iter::repeat_n(class, data.new_scenes.len()))
        .flat_map(|l| std::iter::repeat_n(l, data.samples_per_scene))
        .collect();
    let dim = ext.dictionary.num_scenarios();
    let features = Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i][j]);
    let mut class_names = data.class_names.clone();
    class_names.push(data.new_class_name.clone());
    let wsvm = fit_wsvm(&features, &labels, &class_names, wsvm_config)?;

    Ok(ClassUpdate {
        dictionary: ext.dictionary,
        detector,
        wsvm,
        appended: ext.appended,
        class_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ViewObservation;
    use crate::detector::DetectorMode;
    use crate::pbmf::Provenance;
    use rand::Rng as _;

    const OBJECTS: usize = 12;

    /// Two known scenarios: objects 0..4 and 4..8.
    fn dictionary() -> ScenarioDictionary {
        let w = Array2::from_shape_fn((OBJECTS, 2), |(i, j)| {
            if (j == 0 && i < 4) || (j == 1 && (4..8).contains(&i)) {
                1.0
            } else {
                0.0
            }
        });
        let names = (0..OBJECTS).map(|i| format!("o{i}")).collect();
        ScenarioDictionary::new(w, names, Provenance::Initial)
    }

    fn scenes(objects: &[usize], count: usize, first_id: usize, seed: u64) -> Vec<Scene> {
        let mut rng = rng_from(seed, &[]);
        (0..count)
            .map(|s| Scene {
                scene_id: first_id + s,
                class_label: 0,
                views: (0..4)
                    .map(|v| {
                        let mut p = vec![0u8; OBJECTS];
                        for &o in objects {
                            p[o] = u8::from(rng.random::<f64>() < 0.9);
                        }
                        ViewObservation { view_index: v, object_presence: p }
                    })
                    .collect(),
            })
            .collect()
    }

    fn data(new_objects: &[usize], new_count: usize) -> NewClassData {
        let mut known = scenes(&[0, 1, 2, 3], 10, 0, 1);
        known.extend(scenes(&[4, 5, 6, 7], 10, 10, 2));
        NewClassData {
            known_scenes: known,
            known_labels: [vec![0; 10], vec![1; 10]].concat(),
            class_names: vec!["a".into(), "b".into()],
            new_scenes: scenes(new_objects, new_count, 20, 3),
            new_class_name: "c".into(),
            samples_per_scene: 4,
            seed: 9,
        }
    }

    fn spec() -> DetectorSpec {
        DetectorSpec {
            mode: DetectorMode::Noisy,
            noise_sigma: 0.5,
            flip_rate: 0.0,
            seed: 4,
        }
    }

    fn pbmf() -> PbmfConfig {
        PbmfConfig { k: 3, max_iters: 200, ..PbmfConfig::default() }
    }

    #[test]
    fn new_objects_get_a_scenario_and_old_columns_are_frozen() {
        let dict = dictionary();
        let up = update_on_new_class(&data(&[8, 9, 10, 11], 10), &dict, &spec(), &pbmf(), &WsvmConfig::default())
            .unwrap();
        assert!(up.appended >= 1);
        for j in 0..2 {
            for i in 0..OBJECTS {
                assert_eq!(up.dictionary.w[[i, j]].to_bits(), dict.w[[i, j]].to_bits());
            }
        }
        assert_eq!(up.wsvm.num_classes(), 3);
        assert_eq!(up.class_names, vec!["a", "b", "c"]);
        let members = up.dictionary.binarized().members();
        assert!(members[2..].iter().any(|m| m.contains(&"o8".to_string())));
    }

    #[test]
    fn union_of_known_scenarios_adds_nothing() {
        let dict = dictionary();
        let up = update_on_new_class(
            &data(&[0, 1, 2, 3, 4, 5, 6, 7], 10),
            &dict,
            &spec(),
            &pbmf(),
            &WsvmConfig::default(),
        )
        .unwrap();
        assert_eq!(up.appended, 0);
        assert_eq!(up.dictionary, dict);
        assert_eq!(up.wsvm.num_classes(), 3);
    }

    #[test]
    fn too_few_scenes() {
        let err = update_on_new_class(&data(&[8, 9], 9), &dictionary(), &spec(), &pbmf(), &WsvmConfig::default())
            .unwrap_err();
        assert!(matches!(err, AgentError::InsufficientData { needed: 10, found: 9 }));
    }
}
