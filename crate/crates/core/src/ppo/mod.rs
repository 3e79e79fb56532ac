//! Flat solutions by proximal policy optimization.
//!
//! The agent sees the binary state encoding from
//! [`Puzzle::encode_state`](crate::world::Puzzle::encode_state), earns -1
//! per action and +1 per light switched on, and is trained with the clipped
//! surrogate objective. After training, the shortest of a batch of sampled
//! completing episodes is taken as the flat solution.

pub mod gae;
pub mod mlp;
pub mod rollout;
pub mod update;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Action, Puzzle};
pub use gae::gae_advantages;
pub use mlp::{softmax, DimensionMismatch, Mlp};
pub use rollout::{collect_rollout, episode_return, LightbotEnv, Policy, Rollout};
pub use update::{policy_loss, ppo_update, value_loss, LossStats, Optimizers, Sample, UpdateError};

pub type PpoRng = ChaCha8Rng;

/// Training configuration. Defaults are conventional small-scale PPO
/// settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub episode_cap: usize,
    /// Hard cap on environment steps over the whole run.
    pub max_env_steps: usize,
    /// Episodes in the moving average of returns.
    pub return_window: usize,
    /// Converged once the moving average has improved by less than
    /// `plateau_delta` over the last `plateau_updates` updates.
    pub plateau_updates: usize,
    pub plateau_delta: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            horizon: 2048,
            epochs: 10,
            minibatch: 64,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            hidden: 64,
            episode_cap: 500,
            max_env_steps: 1_000_000,
            return_window: 20,
            plateau_updates: 50,
            plateau_delta: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpoError {
    #[error("invalid hyperparameters: {0}")]
    BadHyperparams(String),
    #[error("no episode completed within {env_steps} environment steps")]
    NeverCompleted { env_steps: usize },
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("none of {0} rollouts completed the puzzle")]
    NoCompletingRollout(usize),
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::BadHyperparams(m.to_string()));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("gamma and lambda must lie in (0, 1]");
        }
        if self.horizon == 0 || self.epochs == 0 || self.minibatch == 0 || self.hidden == 0 {
            return bad("horizon, epochs, minibatch and hidden must be positive");
        }
        if self.episode_cap == 0 || self.return_window == 0 || self.plateau_updates == 0 {
            return bad("episode_cap, return_window and plateau_updates must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// Policy and value networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub policy: Mlp,
    pub value: Mlp,
}

impl Agent {
    pub fn new<R: rand::Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Agent {
        let gain = std::f64::consts::SQRT_2;
        Agent {
            policy: Mlp::orthogonal(input, hidden, 5, gain, 0.01, rng),
            value: Mlp::orthogonal(input, hidden, 1, gain, 1.0, rng),
        }
    }

    pub fn policy_forward(&self, features: &[f64]) -> Result<[f64; 5], DimensionMismatch> {
        self.policy.check_input(features)?;
        Ok(self.action_probs(features))
    }

    pub fn value_forward(&self, features: &[f64]) -> Result<f64, DimensionMismatch> {
        self.value.check_input(features)?;
        Ok(Policy::value(self, features))
    }

    /// Most likely action at every state; used for greedy playback.
    pub fn greedy_episode(&self, puzzle: &Puzzle, episode_cap: usize) -> (Vec<Action>, bool) {
        let mut env = LightbotEnv::new(puzzle, episode_cap);
        let mut actions = Vec::new();
        loop {
            let p = self.action_probs(&env.features());
            let best = (0..5).fold(0, |b, i| if p[i] > p[b] { i } else { b });
            let a = Action::ALL[best];
            actions.push(a);
            let s = env.step(a);
            if s.done {
                return (actions, s.completed);
            }
        }
    }
}

impl Policy for Agent {
    fn action_probs(&self, features: &[f64]) -> [f64; 5] {
        let out = self.policy.forward(features).output;
        let p = softmax(&out);
        [p[0], p[1], p[2], p[3], p[4]]
    }

    fn value(&self, features: &[f64]) -> f64 {
        self.value.forward(features).output[0]
    }
}

/// One line of training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub env_steps: usize,
    pub episodes: usize,
    pub completed_episodes: usize,
    pub mean_return: Option<f64>,
    pub moving_average: Option<f64>,
    #[serde(flatten)]
    pub losses: LossStats,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub history: Vec<UpdateRecord>,
    pub converged: bool,
    pub env_steps: usize,
}

/// Trains with a generator seeded from `hyper.seed`.
pub fn train(puzzle: &Puzzle, hyper: &Hyperparams) -> Result<TrainOutcome, PpoError> {
    let mut rng = PpoRng::seed_from_u64(hyper.seed);
    train_with_rng(puzzle, hyper, &mut rng)
}

/// Collect/update loop until the moving average of episode returns
/// plateaus or the step budget runs out.
pub fn train_with_rng(puzzle: &Puzzle, hyper: &Hyperparams, rng: &mut PpoRng) -> Result<TrainOutcome, PpoError> {
    hyper.validate()?;
    let mut agent = Agent::new(puzzle.feature_len(), hyper.hidden, rng);
    let mut opt = Optimizers::for_agent(&agent);
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(hyper.return_window);
    let mut averages: Vec<Option<f64>> = Vec::new();
    let mut history = Vec::new();
    let mut env_steps = 0;
    let mut ever_completed = false;
    let mut converged = false;

    while env_steps < hyper.max_env_steps {
        let horizon = hyper.horizon.min(hyper.max_env_steps - env_steps);
        let rollout = collect_rollout(puzzle, &agent, horizon, hyper.episode_cap, rng);
        env_steps += rollout.steps.len();
        ever_completed |= rollout.completed_episodes > 0;

        let (adv, ret) = gae_advantages(&rollout, hyper.gamma, hyper.lambda);
        let batch: Vec<Sample> = rollout
            .steps
            .iter()
            .zip(adv.iter().zip(&ret))
            .map(|(t, (&advantage, &ret))| Sample {
                features: t.features.clone(),
                action: t.action,
                old_log_prob: t.log_prob,
                advantage,
                ret,
            })
            .collect();
        let losses = ppo_update(&mut agent, &mut opt, &batch, hyper, rng)?;

        for &r in &rollout.episode_returns {
            if recent.len() == hyper.return_window {
                recent.pop_front();
            }
            recent.push_back(r);
        }
        let moving_average = (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64);
        averages.push(moving_average);
        let n_eps = rollout.episode_returns.len();
        history.push(UpdateRecord {
            update: history.len() + 1,
            env_steps,
            episodes: n_eps,
            completed_episodes: rollout.completed_episodes,
            mean_return: (n_eps > 0).then(|| rollout.episode_returns.iter().sum::<f64>() / n_eps as f64),
            moving_average,
            losses,
        });

        if ever_completed && averages.len() > hyper.plateau_updates {
            let now = averages[averages.len() - 1];
            let then = averages[averages.len() - 1 - hyper.plateau_updates];
            if let (Some(now), Some(then)) = (now, then) {
                if now - then < hyper.plateau_delta {
                    converged = true;
                    break;
                }
            }
        }
    }
    if !ever_completed {
        return Err(PpoError::NeverCompleted { env_steps });
    }
    Ok(TrainOutcome { agent, history, converged, env_steps })
}

/// Samples `n` episodes and returns the shortest one that completes.
/// Ties keep the earliest sample.
pub fn best_of_rollouts<P: Policy + ?Sized, R: rand::Rng + ?Sized>(
    policy: &P,
    puzzle: &Puzzle,
    n: usize,
    episode_cap: usize,
    rng: &mut R,
) -> Result<Vec<Action>, PpoError> {
    let mut best: Option<Vec<Action>> = None;
    for _ in 0..n {
        let (actions, completed) = rollout::sample_episode(puzzle, policy, episode_cap, rng);
        if completed && best.as_ref().is_none_or(|b| actions.len() < b.len()) {
            best = Some(actions);
        }
    }
    best.ok_or(PpoError::NoCompletingRollout(n))
}

/// Train, then pick the best of `rollouts` sampled episodes, all from one
/// seeded generator.
pub fn solve(puzzle: &Puzzle, hyper: &Hyperparams, rollouts: usize) -> Result<(Vec<Action>, TrainOutcome), PpoError> {
    let mut rng = PpoRng::seed_from_u64(hyper.seed);
    let outcome = train_with_rng(puzzle, hyper, &mut rng)?;
    let best = best_of_rollouts(&outcome.agent, puzzle, rollouts, hyper.episode_cap, &mut rng)?;
    Ok((best, outcome))
}
