//! Clipped-surrogate policy loss, value regression, their gradients, and
//! the Adam step that applies them.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use super::mlp::{log_softmax, Mlp};
use super::{Agent, Hyperparams};
use crate::world::Action;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub action: Action,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum UpdateError {
    #[error("non-finite loss in epoch {epoch} (policy {policy_loss}, value {value_loss})")]
    NonFinite { epoch: usize, policy_loss: f64, value_loss: f64 },
}

/// `log pi(action | x)` with its gradient with respect to the parameters
/// and to the input.
pub fn log_prob_grads(net: &Mlp, x: &[f64], action: Action) -> (f64, Vec<f64>, Vec<f64>) {
    let cache = net.forward(x);
    let logp = log_softmax(&cache.output);
    let mut d_out: Vec<f64> = logp.iter().map(|l| -l.exp()).collect();
    d_out[action.index()] += 1.0;
    let mut grad = vec![0.0; net.params.len()];
    let d_in = net.backward(x, &cache, &d_out, &mut grad, true).expect("input grad requested");
    (logp[action.index()], grad, d_in)
}

/// The clipped surrogate for one sample: `min(r*A, clip(r, 1-eps, 1+eps)*A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Mean over `batch` of `-surrogate - entropy_coef * entropy`, and its
/// parameter gradient.
pub fn policy_loss(
    net: &Mlp,
    batch: &[Sample],
    clip: f64,
    entropy_coef: f64,
) -> (f64, Vec<f64>, LossStats) {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; net.params.len()];
    let mut stats = LossStats::default();
    let mut loss = 0.0;
    for s in batch {
        let cache = net.forward(&s.features);
        let logp = log_softmax(&cache.output);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        let a = s.action.index();
        let ratio = (logp[a] - s.old_log_prob).exp();
        let surr = clipped_surrogate(ratio, s.advantage, clip);
        loss += -surr - entropy_coef * entropy;

        // d surr / d logp(a): r*A on the unclipped branch, 0 once clipped
        let clipped = (s.advantage > 0.0 && ratio > 1.0 + clip) || (s.advantage < 0.0 && ratio < 1.0 - clip);
        let d_logp = if clipped { 0.0 } else { ratio * s.advantage };
        let mut d_out = vec![0.0; probs.len()];
        for j in 0..probs.len() {
            let onehot = if j == a { 1.0 } else { 0.0 };
            d_out[j] = -d_logp * (onehot - probs[j]) + entropy_coef * probs[j] * (logp[j] + entropy);
            d_out[j] /= n;
        }
        net.backward(&s.features, &cache, &d_out, &mut grad, false);

        stats.entropy += entropy / n;
        stats.approx_kl += (s.old_log_prob - logp[a]) / n;
        stats.clip_fraction += (((ratio - 1.0).abs() > clip) as u8 as f64) / n;
    }
    stats.policy_loss = loss / n;
    (loss / n, grad, stats)
}

/// Mean of `0.5 * (V(x) - return)^2` and its gradient.
pub fn value_loss(net: &Mlp, batch: &[Sample]) -> (f64, Vec<f64>) {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; net.params.len()];
    let mut loss = 0.0;
    for s in batch {
        let cache = net.forward(&s.features);
        let err = cache.output[0] - s.ret;
        loss += 0.5 * err * err / n;
        net.backward(&s.features, &cache, &[err / n], &mut grad, false);
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + self.eps);
        }
    }
}

fn clip_grad_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Optimizer state for both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub policy: Adam,
    pub value: Adam,
}

impl Optimizers {
    pub fn for_agent(agent: &Agent) -> Optimizers {
        Optimizers { policy: Adam::new(agent.policy.params.len()), value: Adam::new(agent.value.params.len()) }
    }
}

/// Several epochs of minibatch updates over `batch`. On a non-finite loss
/// the agent and optimizer are restored to their state before the call.
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut Agent,
    opt: &mut Optimizers,
    batch: &[Sample],
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<LossStats, UpdateError> {
    let snapshot = (agent.clone(), opt.clone());
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = LossStats::default();
    let mut chunks = 0usize;
    for epoch in 0..hyper.epochs {
        order.shuffle(rng);
        for idx in order.chunks(hyper.minibatch.max(1)) {
            let mut mb: Vec<Sample> = idx.iter().map(|&i| batch[i].clone()).collect();
            normalize_advantages(&mut mb);
            let (pl, mut pg, ps) = policy_loss(&agent.policy, &mb, hyper.clip, hyper.entropy_coef);
            let (vl, mut vg) = value_loss(&agent.value, &mb);
            if !pl.is_finite() || !vl.is_finite() {
                (*agent, *opt) = snapshot;
                return Err(UpdateError::NonFinite { epoch, policy_loss: pl, value_loss: vl });
            }
            clip_grad_norm(&mut pg, hyper.max_grad_norm);
            clip_grad_norm(&mut vg, hyper.max_grad_norm);
            opt.policy.step(&mut agent.policy.params, &pg, hyper.learning_rate);
            opt.value.step(&mut agent.value.params, &vg, hyper.learning_rate);
            if epoch + 1 == hyper.epochs {
                chunks += 1;
                stats.policy_loss += pl;
                stats.value_loss += vl;
                stats.entropy += ps.entropy;
                stats.approx_kl += ps.approx_kl;
                stats.clip_fraction += ps.clip_fraction;
            }
        }
    }
    if chunks > 0 {
        let c = chunks as f64;
        stats.policy_loss /= c;
        stats.value_loss /= c;
        stats.entropy /= c;
        stats.approx_kl /= c;
        stats.clip_fraction /= c;
    }
    Ok(stats)
}

fn normalize_advantages(mb: &mut [Sample]) {
    if mb.len() < 2 {
        return;
    }
    let n = mb.len() as f64;
    let mean = mb.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = mb.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for s in mb {
        s.advantage = (s.advantage - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, net: &Mlp, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| {
                let features: Vec<f64> = (0..net.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let action = Action::ALL[rng.random_range(0..5)];
                let cache = net.forward(&features);
                let lp = log_softmax(&cache.output)[action.index()];
                Sample {
                    features,
                    action,
                    old_log_prob: lp,
                    advantage: rng.random_range(-2.0..2.0),
                    ret: rng.random_range(-3.0..1.0),
                }
            })
            .collect()
    }

    #[test]
    fn surrogate_at_unit_ratio_is_unclipped() {
        for a in [-2.0, -0.1, 0.0, 0.7, 3.0] {
            assert_eq!(clipped_surrogate(1.0, a, 0.2), a);
        }
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        // pessimistic side is never clipped
        assert_eq!(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
    }

    #[test]
    fn zero_advantage_gives_zero_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::orthogonal(6, 8, 5, 1.0, 1.0, &mut rng);
        let mut batch = random_batch(&mut rng, &net, 4);
        batch.iter_mut().for_each(|s| s.advantage = 0.0);
        let (_, g, _) = policy_loss(&net, &batch, 0.2, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut adam = Adam::new(2);
        for _ in 0..2000 {
            let g = vec![2.0 * p[0], 2.0 * p[1]];
            adam.step(&mut p, &g, 0.01);
        }
        assert!(p[0].abs() < 1e-2 && p[1].abs() < 1e-2);
    }

    #[test]
    fn non_finite_update_restores_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = Agent::new(6, 8, &mut rng);
        let mut opt = Optimizers::for_agent(&agent);
        let mut batch = random_batch(&mut rng, &agent.policy, 4);
        batch[2].ret = f64::NAN;
        let before = agent.clone();
        let err = ppo_update(&mut agent, &mut opt, &batch, &Hyperparams::default(), &mut rng).unwrap_err();
        assert!(matches!(err, UpdateError::NonFinite { epoch: 0, .. }));
        assert_eq!(agent, before);
    }
}
