//! Environment wrapper with the -1 per action / +1 per new light reward,
//! and on-policy rollout collection.

use rand::Rng;

use crate::world::{Action, Puzzle, WorldState};

pub const STEP_REWARD: f64 = -1.0;
pub const LIGHT_REWARD: f64 = 1.0;

/// Episodic view of a puzzle.
#[derive(Debug, Clone)]
pub struct LightbotEnv<'a> {
    puzzle: &'a Puzzle,
    state: WorldState,
    steps: usize,
    episode_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub reward: f64,
    pub completed: bool,
    /// Episode over, by completion or by reaching the cap.
    pub done: bool,
}

impl<'a> LightbotEnv<'a> {
    pub fn new(puzzle: &'a Puzzle, episode_cap: usize) -> Self {
        LightbotEnv { puzzle, state: puzzle.initial_state(), steps: 0, episode_cap }
    }

    pub fn reset(&mut self) {
        self.state = self.puzzle.initial_state();
        self.steps = 0;
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn features(&self) -> Vec<f64> {
        self.puzzle.encode_state(&self.state)
    }

    pub fn step(&mut self, action: Action) -> EnvStep {
        let (next, event) = self.puzzle.step(self.state, action);
        self.state = next;
        self.steps += 1;
        let reward = STEP_REWARD + if event.light_turned_on.is_some() { LIGHT_REWARD } else { 0.0 };
        let completed = self.puzzle.is_complete(&next);
        EnvStep { reward, completed, done: completed || self.steps >= self.episode_cap }
    }
}

/// Undiscounted return of playing `actions` from the start, stopping early
/// if the puzzle completes.
pub fn episode_return(puzzle: &Puzzle, actions: &[Action]) -> f64 {
    let mut env = LightbotEnv::new(puzzle, usize::MAX);
    let mut total = 0.0;
    for &a in actions {
        let s = env.step(a);
        total += s.reward;
        if s.completed {
            break;
        }
    }
    total
}

/// Anything that maps encoded states to action probabilities.
pub trait Policy {
    fn action_probs(&self, features: &[f64]) -> [f64; 5];

    /// State-value estimate; policies without a critic report 0.
    fn value(&self, _features: &[f64]) -> f64 {
        0.0
    }
}

pub fn sample_action<R: Rng + ?Sized>(probs: &[f64; 5], rng: &mut R) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Action::ALL[i];
        }
    }
    // rounding left u beyond the cumulative sum: last action with mass
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(4);
    Action::ALL[last]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub log_prob: f64,
    pub value: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub steps: Vec<Transition>,
    /// Value of the state after the last step, used to bootstrap when the
    /// rollout ends mid-episode; 0 if the last step ended an episode.
    pub last_value: f64,
    pub episode_returns: Vec<f64>,
    pub episode_lengths: Vec<usize>,
    pub completed_episodes: usize,
}

impl Rollout {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|t| t.reward).collect()
    }
}

/// Samples `horizon` steps from `policy`, starting a fresh episode at the
/// puzzle's start and restarting whenever an episode ends.
pub fn collect_rollout<P: Policy + ?Sized, R: Rng + ?Sized>(
    puzzle: &Puzzle,
    policy: &P,
    horizon: usize,
    episode_cap: usize,
    rng: &mut R,
) -> Rollout {
    let mut env = LightbotEnv::new(puzzle, episode_cap);
    let mut out = Rollout::default();
    let mut ep_return = 0.0;
    let mut ep_len = 0;
    for _ in 0..horizon {
        let features = env.features();
        let probs = policy.action_probs(&features);
        let value = policy.value(&features);
        let action = sample_action(&probs, rng);
        let s = env.step(action);
        ep_return += s.reward;
        ep_len += 1;
        out.steps.push(Transition {
            log_prob: probs[action.index()].ln(),
            features,
            action,
            reward: s.reward,
            value,
            done: s.done,
        });
        if s.done {
            out.episode_returns.push(ep_return);
            out.episode_lengths.push(ep_len);
            out.completed_episodes += s.completed as usize;
            ep_return = 0.0;
            ep_len = 0;
            env.reset();
        }
    }
    out.last_value = match out.steps.last() {
        Some(t) if !t.done => policy.value(&env.features()),
        _ => 0.0,
    };
    out
}

/// One sampled episode: the actions taken and whether it completed.
pub fn sample_episode<P: Policy + ?Sized, R: Rng + ?Sized>(
    puzzle: &Puzzle,
    policy: &P,
    episode_cap: usize,
    rng: &mut R,
) -> (Vec<Action>, bool) {
    let mut env = LightbotEnv::new(puzzle, episode_cap);
    let mut actions = Vec::new();
    loop {
        let probs = policy.action_probs(&env.features());
        let a = sample_action(&probs, rng);
        actions.push(a);
        let s = env.step(a);
        if s.done {
            return (actions, s.completed);
        }
    }
}
