//! Scene-level fusion of per-view scenario scores by elementwise max.

use thiserror::Error;

use crate::detector::ScenarioScores;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FusionError {
    #[error("no views to fuse")]
    Empty,
    #[error("score length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Max-pooled scores plus the views that contributed to them.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedScores {
    pub scores: Vec<f64>,
    /// Sorted, deduplicated view indices.
    pub views: Vec<usize>,
}

impl FusedScores {
    pub fn from_view(view_index: usize, scores: &ScenarioScores) -> Self {
        Self {
            scores: scores.0.clone(),
            views: vec![view_index],
        }
    }
}

/// Fusion rule over view scores; [`MaxPool`] is the only one shipped.
pub trait FusionRule {
    fn fuse(&self, views: &[(usize, &ScenarioScores)]) -> Result<FusedScores, FusionError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MaxPool;

impl FusionRule for MaxPool {
    fn fuse(&self, views: &[(usize, &ScenarioScores)]) -> Result<FusedScores, FusionError> {
        fuse_views(views)
    }
}

pub fn fuse_views(views: &[(usize, &ScenarioScores)]) -> Result<FusedScores, FusionError> {
    let ((first_idx, first), rest) = views.split_first().ok_or(FusionError::Empty)?;
    rest.iter().try_fold(
        FusedScores::from_view(*first_idx, first),
        |acc, (idx, s)| incremental_fuse(&acc, *idx, s),
    )
}

pub fn incremental_fuse(
    current: &FusedScores,
    view_index: usize,
    new_view: &ScenarioScores,
) -> Result<FusedScores, FusionError> {
    if current.scores.len() != new_view.0.len() {
        return Err(FusionError::LengthMismatch {
            expected: current.scores.len(),
            found: new_view.0.len(),
        });
    }
    let scores = current
        .scores
        .iter()
        .zip(&new_view.0)
        .map(|(a, b)| a.max(*b))
        .collect();
    let mut views = current.views.clone();
    if let Err(pos) = views.binary_search(&view_index) {
        views.insert(pos, view_index);
    }
    Ok(FusedScores { scores, views })
}

/// Fuses the listed views of a scene.
pub fn fuse_subset(
    view_scores: &[ScenarioScores],
    subset: &[usize],
) -> Result<FusedScores, FusionError> {
    let views: Vec<(usize, &ScenarioScores)> = subset.iter().map(|&i| (i, &view_scores[i])).collect();
    fuse_views(&views)
}

/// A uniformly sized (1..=n) random subset of `0..n`, sorted.
pub fn sample_view_subset<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let size = rng.random_range(1..=n);
    let mut picks = rand::seq::index::sample(rng, n, size).into_vec();
    picks.sort_unstable();
    picks
}

/// Training features for a classifier that must cope with any number of
/// views: `samples_per_scene` fused random subsets per scene, scene by scene.
pub fn random_subset_features<R: rand::Rng + ?Sized>(
    scenes: &[Vec<ScenarioScores>],
    samples_per_scene: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, FusionError> {
    let mut out = Vec::with_capacity(scenes.len() * samples_per_scene);
    for views in scenes {
        for _ in 0..samples_per_scene {
            let subset = sample_view_subset(views.len(), rng);
            out.push(fuse_subset(views, &subset)?.scores);
        }
    }
    Ok(out)
}
