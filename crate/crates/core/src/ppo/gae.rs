//! Generalized advantage estimation.

use super::rollout::Rollout;

/// Backward recursion `A_t = delta_t + gamma * lambda * A_{t+1}`, with
/// `delta_t = r_t + gamma * V_{t+1} - V_t` and both terms cut at episode
/// boundaries. Returns `(advantages, returns)` where
/// `returns = advantages + values`.
pub fn gae_advantages(rollout: &Rollout, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let steps = &rollout.steps;
    let n = steps.len();
    let mut adv = vec![0.0; n];
    let mut next_value = rollout.last_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let cont = if steps[t].done { 0.0 } else { 1.0 };
        let delta = steps[t].reward + gamma * next_value * cont - steps[t].value;
        next_adv = delta + gamma * lambda * cont * next_adv;
        adv[t] = next_adv;
        next_value = steps[t].value;
    }
    let returns = adv.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    (adv, returns)
}
