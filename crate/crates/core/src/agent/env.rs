use serde::{Deserialize, Serialize};

use super::{AgentError, Result};
use crate::detector::ScenarioScores;
use crate::fusion::{incremental_fuse, FusedScores};
use crate::openset::{wsvm_decide, Decision, WsvmModel};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub class_probs: Vec<f64>,
    /// `1 - max(class_probs)`.
    pub rejection_score: f64,
    /// Views seen divided by the total number of views.
    pub views_seen_norm: f64,
}

impl AgentState {
    pub fn from_scores(class_probs: Vec<f64>, views_seen: usize, total_views: usize) -> Self {
        let max = class_probs.iter().copied().fold(0.0, f64::max);
        Self {
            rejection_score: (1.0 - max).clamp(0.0, 1.0),
            views_seen_norm: views_seen as f64 / total_views.max(1) as f64,
            class_probs,
        }
    }

    /// `[class_probs.., rejection_score, views_seen_norm]`.
    pub fn features(&self) -> Vec<f64> {
        let mut f = self.class_probs.clone();
        f.push(self.rejection_score);
        f.push(self.views_seen_norm);
        f
    }
}

pub fn build_state(
    fused: &FusedScores,
    wsvm: &WsvmModel,
    views_seen: usize,
    total_views: usize,
) -> AgentState {
    let decision = wsvm_decide(wsvm, &fused.scores);
    AgentState::from_scores(decision.scores().to_vec(), views_seen, total_views)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Predict,
    RejectAndEnd,
    MoveNearestUnseen,
    MoveFurthestUnseen,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::Predict,
        Action::RejectAndEnd,
        Action::MoveNearestUnseen,
        Action::MoveFurthestUnseen,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_move(self) -> bool {
        matches!(self, Action::MoveNearestUnseen | Action::MoveFurthestUnseen)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Predict => "predict",
            Action::RejectAndEnd => "reject",
            Action::MoveNearestUnseen => "move_nearest",
            Action::MoveFurthestUnseen => "move_furthest",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSpec {
    pub psi: f64,
    pub move_when_correct: f64,
    pub wrong_class: f64,
    pub wrongful_reject: f64,
    pub correct_base: f64,
    /// Reward `correct_base + remaining^psi` for rejecting an unknown scene.
    pub reward_unknown_reject: bool,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            psi: 0.0,
            move_when_correct: -1.0,
            wrong_class: -8.0,
            wrongful_reject: -8.0,
            correct_base: 8.0,
            reward_unknown_reject: true,
        }
    }
}

impl RewardSpec {
    pub fn with_psi(psi: f64) -> Self {
        Self {
            psi,
            ..Self::default()
        }
    }

    /// `remaining^psi`, with nothing left to see giving no bonus.
    pub fn bonus(&self, remaining: usize) -> f64 {
        if remaining == 0 {
            0.0
        } else {
            (remaining as f64).powf(self.psi)
        }
    }

    pub fn correct(&self, remaining: usize) -> f64 {
        self.correct_base + self.bonus(remaining)
    }
}

/// One scene being explored. Views sit on a ring in index order.
#[derive(Debug, Clone)]
pub struct SceneEpisode {
    pub view_scores: Vec<ScenarioScores>,
    /// `None` for a scene of an unknown class.
    pub label: Option<usize>,
    pub visited: Vec<bool>,
    pub current: usize,
    pub fused: FusedScores,
    pub done: bool,
    decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `None` once the episode has ended.
    pub next: Option<AgentState>,
    pub reward: f64,
    pub done: bool,
    /// Final answer for terminal steps: a class, or `None` for a rejection.
    pub prediction: Option<Option<usize>>,
}

fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

impl SceneEpisode {
    pub fn new(
        view_scores: Vec<ScenarioScores>,
        label: Option<usize>,
        start: usize,
        wsvm: &WsvmModel,
    ) -> Result<Self> {
        if view_scores.is_empty() {
            return Err(AgentError::NoViews);
        }
        let start = start % view_scores.len();
        let fused = FusedScores::from_view(start, &view_scores[start]);
        let decision = wsvm_decide(wsvm, &fused.scores);
        let mut visited = vec![false; view_scores.len()];
        visited[start] = true;
        Ok(Self {
            view_scores,
            label,
            visited,
            current: start,
            fused,
            done: false,
            decision,
        })
    }

    pub fn total_views(&self) -> usize {
        self.view_scores.len()
    }

    pub fn views_seen(&self) -> usize {
        self.visited.iter().filter(|&&v| v).count()
    }

    pub fn remaining(&self) -> usize {
        self.total_views() - self.views_seen()
    }

    pub fn state(&self) -> AgentState {
        AgentState::from_scores(
            self.decision.scores().to_vec(),
            self.views_seen(),
            self.total_views(),
        )
    }

    /// The classifier's answer on the views seen so far.
    pub fn current_prediction(&self) -> Option<usize> {
        self.decision.class()
    }

    pub fn prediction_correct(&self) -> bool {
        self.current_prediction() == self.label
    }

    pub fn feasible_actions(&self) -> Vec<Action> {
        if self.done {
            Vec::new()
        } else if self.remaining() > 0 {
            Action::ALL.to_vec()
        } else {
            vec![Action::Predict, Action::RejectAndEnd]
        }
    }

    /// Target of a move: the unseen view at the smallest (or largest)
    /// circular distance, clockwise first on ties.
    pub fn move_target(&self, action: Action) -> Option<usize> {
        if !action.is_move() {
            return None;
        }
        let n = self.total_views();
        let mut best: Option<(usize, usize)> = None;
        // Walking clockwise offsets 1..n visits tie candidates clockwise first.
        for offset in 1..n {
            let v = (self.current + offset) % n;
            if self.visited[v] {
                continue;
            }
            let d = circular_distance(self.current, v, n);
            let better = match (best, action) {
                (None, _) => true,
                (Some((_, bd)), Action::MoveNearestUnseen) => d < bd,
                (Some((_, bd)), _) => d > bd,
            };
            if better {
                best = Some((v, d));
            }
        }
        best.map(|(v, _)| v)
    }
}

pub fn env_step(
    episode: &mut SceneEpisode,
    action: Action,
    wsvm: &WsvmModel,
    reward: &RewardSpec,
) -> Result<StepOutcome> {
    if episode.done {
        return Err(AgentError::Finished);
    }
    let remaining = episode.remaining();
    let correct_now = episode.prediction_correct();
    match action {
        Action::Predict => {
            episode.done = true;
            let r = if correct_now {
                reward.correct(remaining)
            } else {
                reward.wrong_class
            };
            Ok(StepOutcome {
                next: None,
                reward: r,
                done: true,
                prediction: Some(episode.current_prediction()),
            })
        }
        Action::RejectAndEnd => {
            episode.done = true;
            let r = if episode.label.is_none() {
                if reward.reward_unknown_reject {
                    reward.correct(remaining)
                } else {
                    0.0
                }
            } else if correct_now {
                reward.wrongful_reject
            } else {
                0.0
            };
            Ok(StepOutcome {
                next: None,
                reward: r,
                done: true,
                prediction: Some(None),
            })
        }
        Action::MoveNearestUnseen | Action::MoveFurthestUnseen => {
            let target = episode.move_target(action).ok_or_else(|| AgentError::Infeasible {
                action,
                reason: "every view has been seen".into(),
            })?;
            episode.visited[target] = true;
            episode.current = target;
            episode.fused = incremental_fuse(&episode.fused, target, &episode.view_scores[target])?;
            episode.decision = wsvm_decide(wsvm, &episode.fused.scores);
            Ok(StepOutcome {
                next: Some(episode.state()),
                reward: if correct_now {
                    reward.move_when_correct
                } else {
                    0.0
                },
                done: false,
                prediction: None,
            })
        }
    }
}
