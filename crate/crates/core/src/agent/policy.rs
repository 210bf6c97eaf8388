use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::env::{env_step, Action, AgentState, RewardSpec, SceneEpisode};
use super::{AgentError, Result};
use crate::detector::ScenarioScores;
use crate::openset::WsvmModel;
use crate::rng::{rng_from, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub episodes: usize,
    /// Probability a training episode is drawn from the unknown scenes.
    pub unknown_fraction: f64,
    pub seed: u64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            discount: 0.98,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            replay_capacity: 10_000,
            batch_size: 32,
            episodes: 20_000,
            unknown_fraction: 0.25,
            seed: 0,
        }
    }
}

/// Linear Q-function: one weight vector per action over the state
/// features followed by a constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolicy {
    pub weights: Vec<Vec<f64>>,
    pub config: QConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next: Option<Vec<f64>>,
    pub next_feasible: Vec<Action>,
    pub done: bool,
}

fn with_bias(features: &[f64]) -> impl Iterator<Item = f64> + '_ {
    features.iter().copied().chain(std::iter::once(1.0))
}

impl QPolicy {
    pub fn new(feature_dim: usize, config: QConfig) -> Self {
        Self {
            weights: vec![vec![0.0; feature_dim + 1]; Action::ALL.len()],
            config,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights[0].len() - 1
    }

    pub fn q_value(&self, features: &[f64], action: Action) -> f64 {
        self.weights[action.index()]
            .iter()
            .zip(with_bias(features))
            .map(|(w, x)| w * x)
            .sum()
    }

    /// Highest-valued feasible action; earlier actions win ties.
    pub fn greedy(&self, features: &[f64], feasible: &[Action]) -> Option<Action> {
        feasible.iter().copied().fold(None, |best, a| match best {
            Some(b) if self.q_value(features, b) >= self.q_value(features, a) => Some(b),
            _ => Some(a),
        })
    }

    /// TD(0): `w_a += η (r + γ max_a' Q(s', a') (1 - done) - Q(s, a)) [s, 1]`.
    pub fn q_update(&mut self, t: &Transition) -> Result<()> {
        let dim = self.feature_dim();
        if t.state.len() != dim {
            return Err(AgentError::Dimension {
                expected: dim,
                found: t.state.len(),
            });
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !t.reward.is_finite() || !finite(&t.state) || t.next.as_deref().is_some_and(|n| !finite(n))
        {
            return Err(AgentError::NonFinite);
        }
        let future = match (&t.next, t.done) {
            (Some(next), false) => t
                .next_feasible
                .iter()
                .map(|&a| self.q_value(next, a))
                .fold(f64::NEG_INFINITY, f64::max),
            _ => 0.0,
        };
        let future = if future.is_finite() { future } else { 0.0 };
        let td = t.reward + self.config.discount * future - self.q_value(&t.state, t.action);
        let step = self.config.learning_rate * td;
        for (w, x) in self.weights[t.action.index()].iter_mut().zip(with_bias(&t.state)) {
            *w += step * x;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::from("# scenario q-policy\n");
        let _ = writeln!(out, "feature_dim {}", self.feature_dim());
        for (k, v) in [
            ("learning_rate", c.learning_rate),
            ("discount", c.discount),
            ("epsilon_start", c.epsilon_start),
            ("epsilon_end", c.epsilon_end),
            ("epsilon_decay_fraction", c.epsilon_decay_fraction),
            ("unknown_fraction", c.unknown_fraction),
        ] {
            let _ = writeln!(out, "{k} {v:?}");
        }
        for (k, v) in [
            ("replay_capacity", c.replay_capacity),
            ("batch_size", c.batch_size),
            ("episodes", c.episodes),
        ] {
            let _ = writeln!(out, "{k} {v}");
        }
        let _ = writeln!(out, "seed {}", c.seed);
        for a in Action::ALL {
            let ws: Vec<String> = self.weights[a.index()].iter().map(|w| format!("{w:?}")).collect();
            let _ = writeln!(out, "action {} {}", a.name(), ws.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<QPolicy> {
        let mut config = QConfig::default();
        let mut dim: Option<usize> = None;
        let mut weights: Vec<Option<Vec<f64>>> = vec![None; Action::ALL.len()];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| AgentError::Parse { line: i + 1, message };
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let float = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s}: {e}")));
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s}: {e}")));
            let single = || rest.first().copied().ok_or_else(|| err(format!("{key} needs a value")));
            match key {
                "feature_dim" => dim = Some(int(single()?)?),
                "learning_rate" => config.learning_rate = float(single()?)?,
                "discount" => config.discount = float(single()?)?,
                "epsilon_start" => config.epsilon_start = float(single()?)?,
                "epsilon_end" => config.epsilon_end = float(single()?)?,
                "epsilon_decay_fraction" => config.epsilon_decay_fraction = float(single()?)?,
                "unknown_fraction" => config.unknown_fraction = float(single()?)?,
                "replay_capacity" => config.replay_capacity = int(single()?)?,
                "batch_size" => config.batch_size = int(single()?)?,
                "episodes" => config.episodes = int(single()?)?,
                "seed" => {
                    config.seed = single()?
                        .parse()
                        .map_err(|e| err(format!("seed: {e}")))?
                }
                "action" => {
                    let name = rest.first().ok_or_else(|| err("action needs a name".into()))?;
                    let a = Action::from_name(name)
                        .ok_or_else(|| err(format!("unknown action `{name}`")))?;
                    let ws = rest[1..].iter().map(|s| float(s)).collect::<Result<Vec<f64>>>()?;
                    weights[a.index()] = Some(ws);
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let dim = dim.ok_or(AgentError::Parse {
            line: 0,
            message: "missing feature_dim".into(),
        })?;
        let mut out = Vec::with_capacity(weights.len());
        for (a, w) in Action::ALL.iter().zip(weights) {
            let w = w.ok_or_else(|| AgentError::Parse {
                line: 0,
                message: format!("missing weights for {}", a.name()),
            })?;
            if w.len() != dim + 1 {
                return Err(AgentError::Parse {
                    line: 0,
                    message: format!("{} has {} weights, expected {}", a.name(), w.len(), dim + 1),
                });
            }
            out.push(w);
        }
        Ok(QPolicy { weights: out, config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<QPolicy> {
        let text = std::fs::read_to_string(path).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over the first
/// `epsilon_decay_fraction` of the episodes, constant afterwards.
pub fn epsilon_at(episode: usize, total: usize, config: &QConfig) -> f64 {
    let decay = (total as f64 * config.epsilon_decay_fraction).floor() as usize;
    if decay == 0 || episode >= decay {
        return config.epsilon_end;
    }
    let t = episode as f64 / decay as f64;
    config.epsilon_start + (config.epsilon_end - config.epsilon_start) * t
}

#[derive(Debug, Clone)]
pub struct TrainingScene {
    pub view_scores: Vec<ScenarioScores>,
    /// `None` for a pseudo-unknown scene.
    pub label: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPoint {
    pub episode: usize,
    pub ret: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingResult {
    pub policy: QPolicy,
    pub curve: Vec<TrainingPoint>,
}

impl TrainingResult {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("episode,return,epsilon\n");
        for p in &self.curve {
            let _ = writeln!(out, "{},{:.6},{:.6}", p.episode, p.ret, p.epsilon);
        }
        out
    }
}

fn choose(policy: &QPolicy, state: &AgentState, feasible: &[Action], eps: f64, rng: &mut Rng) -> Action {
    if rng.random::<f64>() < eps {
        feasible[rng.random_range(0..feasible.len())]
    } else {
        policy
            .greedy(&state.features(), feasible)
            .expect("feasible set is nonempty")
    }
}

/// ε-greedy Q-learning with a ring replay buffer. Each step stores its
/// transition and replays a uniformly drawn minibatch.
pub fn train_policy(
    known: &[TrainingScene],
    unknown: &[TrainingScene],
    wsvm: &WsvmModel,
    reward: &RewardSpec,
    config: &QConfig,
) -> Result<TrainingResult> {
    if known.is_empty() && unknown.is_empty() {
        return Err(AgentError::EmptyTraining);
    }
    let dim = wsvm.num_classes() + 2;
    let mut policy = QPolicy::new(dim, config.clone());
    let mut rng = rng_from(config.seed, &[0x7a1]);
    let mut replay: Vec<Transition> = Vec::with_capacity(config.replay_capacity.min(1 << 16));
    let mut cursor = 0;
    let mut curve = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let eps = epsilon_at(episode, config.episodes, config);
        let pool = if unknown.is_empty() {
            known
        } else if known.is_empty() || rng.random::<f64>() < config.unknown_fraction {
            unknown
        } else {
            known
        };
        let scene = &pool[rng.random_range(0..pool.len())];
        let start = rng.random_range(0..scene.view_scores.len().max(1));
        let mut ep = SceneEpisode::new(scene.view_scores.clone(), scene.label, start, wsvm)?;
        let mut state = ep.state();
        let mut ret = 0.0;
        let mut discount = 1.0;
        loop {
            let feasible = ep.feasible_actions();
            let action = choose(&policy, &state, &feasible, eps, &mut rng);
            let out = env_step(&mut ep, action, wsvm, reward)?;
            ret += discount * out.reward;
            discount *= config.discount;
            let t = Transition {
                state: state.features(),
                action,
                reward: out.reward,
                next: out.next.as_ref().map(AgentState::features),
                next_feasible: ep.feasible_actions(),
                done: out.done,
            };
            if config.replay_capacity > 0 {
                if replay.len() < config.replay_capacity {
                    replay.push(t);
                } else {
                    replay[cursor] = t;
                }
                cursor = (cursor + 1) % config.replay_capacity;
                for _ in 0..config.batch_size.min(replay.len()) {
                    let i = rng.random_range(0..replay.len());
                    policy.q_update(&replay[i])?;
                }
            } else {
                policy.q_update(&t)?;
            }
            match out.next {
                Some(next) => state = next,
                None => break,
            }
        }
        curve.push(TrainingPoint {
            episode,
            ret,
            epsilon: eps,
        });
    }
    Ok(TrainingResult { policy, curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeOutcome {
    Correct,
    Wrong,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<AgentState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Final answer: a class, or `None` when the scene was rejected.
    pub prediction: Option<usize>,
    pub outcome: EpisodeOutcome,
}

/// Plays one episode. Greedy episodes ignore `seed`; otherwise actions are
/// ε-greedy with the policy's final epsilon.
pub fn run_episode(
    policy: &QPolicy,
    mut episode: SceneEpisode,
    wsvm: &WsvmModel,
    reward: &RewardSpec,
    greedy: bool,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = rng_from(seed, &[0xe91]);
    let eps = if greedy { 0.0 } else { policy.config.epsilon_end };
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut state = episode.state();
    loop {
        let feasible = episode.feasible_actions();
        let action = choose(policy, &state, &feasible, eps, &mut rng);
        let out = env_step(&mut episode, action, wsvm, reward)?;
        states.push(state.clone());
        actions.push(action);
        rewards.push(out.reward);
        if let Some(prediction) = out.prediction {
            let outcome = match prediction {
                None => EpisodeOutcome::Rejected,
                Some(c) if Some(c) == episode.label => EpisodeOutcome::Correct,
                Some(_) => EpisodeOutcome::Wrong,
            };
            return Ok(Trajectory {
                states,
                actions,
                rewards,
                prediction,
                outcome,
            });
        }
        state = out.next.expect("non-terminal step has a next state");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::env::tests::{scene, toy_wsvm};

    fn transition(state: Vec<f64>, reward: f64) -> Transition {
        Transition {
            state,
            action: Action::Predict,
            reward,
            next: None,
            next_feasible: Vec::new(),
            done: true,
        }
    }

    #[test]
    fn terminal_update_from_zero() {
        let mut p = QPolicy::new(3, QConfig::default());
        p.q_update(&transition(vec![0.2, 0.5, 1.0], 4.0)).unwrap();
        let eta = 0.01;
        assert_eq!(p.weights[0], vec![eta * 4.0 * 0.2, eta * 4.0 * 0.5, eta * 4.0, eta * 4.0]);
        assert!(p.weights[1..].iter().flatten().all(|&w| w == 0.0));
    }

    #[test]
    fn zero_td_error_leaves_weights() {
        let mut p = QPolicy::new(2, QConfig::default());
        p.weights[0] = vec![1.0, 2.0, 0.5];
        let before = p.clone();
        let s = vec![0.3, 0.4];
        let q = p.q_value(&s, Action::Predict);
        p.q_update(&transition(s, q)).unwrap();
        for (a, b) in p.weights[0].iter().zip(&before.weights[0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_replay_converges_to_reward() {
        let cfg = QConfig { learning_rate: 0.1, ..QConfig::default() };
        let mut p = QPolicy::new(2, cfg);
        let t = transition(vec![0.6, 0.8], -8.0);
        for _ in 0..2000 {
            p.q_update(&t).unwrap();
        }
        assert!((p.q_value(&t.state, Action::Predict) + 8.0).abs() < 1e-6);
    }

    #[test]
    fn nan_rejected() {
        let mut p = QPolicy::new(1, QConfig::default());
        assert!(matches!(p.q_update(&transition(vec![f64::NAN], 1.0)), Err(AgentError::NonFinite)));
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = QConfig::default();
        assert_eq!(epsilon_at(0, 1000, &cfg), 1.0);
        assert_eq!(epsilon_at(500, 1000, &cfg), 0.05);
        assert_eq!(epsilon_at(999, 1000, &cfg), 0.05);
        assert!((epsilon_at(250, 1000, &cfg) - 0.525).abs() < 1e-12);
    }

    #[test]
    fn zero_episodes_returns_initial_policy() {
        let m = toy_wsvm();
        let scenes = vec![TrainingScene { view_scores: scene(&[[0.9, 0.1]; 8]), label: Some(0) }];
        let cfg = QConfig { episodes: 0, ..QConfig::default() };
        let r = train_policy(&scenes, &[], &m, &RewardSpec::default(), &cfg).unwrap();
        assert_eq!(r.policy, QPolicy::new(4, cfg));
        assert!(r.curve.is_empty());
        assert!(matches!(
            train_policy(&[], &[], &m, &RewardSpec::default(), &QConfig::default()),
            Err(AgentError::EmptyTraining)
        ));
    }

    #[test]
    fn always_predict_policy_stops_at_once() {
        let m = toy_wsvm();
        let mut p = QPolicy::new(4, QConfig::default());
        p.weights[Action::Predict.index()][4] = 10.0;
        let ep = SceneEpisode::new(scene(&[[0.9, 0.1]; 8]), Some(0), 3, &m).unwrap();
        let t = run_episode(&p, ep, &m, &RewardSpec::default(), true, 0).unwrap();
        assert_eq!(t.actions, vec![Action::Predict]);
        assert_eq!(t.outcome, EpisodeOutcome::Correct);
    }

    #[test]
    fn moves_bounded_by_ring_size() {
        let m = toy_wsvm();
        let mut p = QPolicy::new(4, QConfig::default());
        p.weights[Action::MoveFurthestUnseen.index()][4] = 10.0;
        let ep = SceneEpisode::new(scene(&[[0.5, 0.5]; 8]), Some(1), 0, &m).unwrap();
        let t = run_episode(&p, ep.clone(), &m, &RewardSpec::default(), true, 0).unwrap();
        let moves = t.actions.iter().filter(|a| a.is_move()).count();
        assert_eq!(moves, 7);
        assert_eq!(t.actions.len(), 8);
        let again = run_episode(&p, ep, &m, &RewardSpec::default(), true, 0).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn text_roundtrip() {
        let mut p = QPolicy::new(3, QConfig { seed: 42, ..QConfig::default() });
        p.weights[2] = vec![0.1, -1.0 / 3.0, 1e-17, 7.0];
        let back = QPolicy::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert!(matches!(
            QPolicy::from_text("feature_dim 1\naction jump 1 2\n"),
            Err(AgentError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let m = toy_wsvm();
        let scenes = vec![
            TrainingScene { view_scores: scene(&[[0.9, 0.1], [0.4, 0.6], [0.8, 0.2], [0.9, 0.0]]), label: Some(0) },
            TrainingScene { view_scores: scene(&[[0.1, 0.9], [0.6, 0.4], [0.0, 0.8], [0.2, 0.9]]), label: Some(1) },
        ];
        let cfg = QConfig { episodes: 300, seed: 5, ..QConfig::default() };
        let a = train_policy(&scenes, &[], &m, &RewardSpec::default(), &cfg).unwrap();
        let b = train_policy(&scenes, &[], &m, &RewardSpec::default(), &cfg).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.curve, b.curve);
    }
}
