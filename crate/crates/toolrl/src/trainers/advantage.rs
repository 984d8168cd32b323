//! Advantage estimators shared by the three trainers.

/// Discount and trace parameters for the value-based estimator. Episodes
/// here are short and terminally rewarded, so both stay at 1: the advantage
/// telescopes to "return minus baseline".
pub const GAMMA: f64 = 1.0;
pub const LAMBDA: f64 = 1.0;

/// `(x - mean) / (population std + floor)`, elementwise.
pub fn standardize(values: &[f64], std_floor: f64) -> Vec<f64> {
    assert!(!values.is_empty(), "cannot standardize an empty batch");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + std_floor;
    values.iter().map(|v| (v - mean) / denom).collect()
}

/// Group-relative advantages: rewards of one task's rollout group,
/// standardized within the group. Needs at least two rollouts to carry any
/// signal.
pub fn grpo_advantages(rewards: &[f64], std_floor: f64) -> Vec<f64> {
    assert!(
        rewards.len() >= 2,
        "group advantages need at least two rollouts per task"
    );
    standardize(rewards, std_floor)
}

/// Batch advantages from KL-shaped returns: `R_i = r_i - beta * kl_sum_i`,
/// standardized across the whole batch. No critic anywhere.
pub fn reinforcepp_advantages(
    rewards: &[f64],
    kl_sums: &[f64],
    beta: f64,
    std_floor: f64,
) -> Vec<f64> {
    assert_eq!(rewards.len(), kl_sums.len(), "one KL sum per reward");
    let shaped: Vec<f64> = rewards
        .iter()
        .zip(kl_sums)
        .map(|(r, kl)| r - beta * kl)
        .collect();
    standardize(&shaped, std_floor)
}

/// Per-step advantages and returns for one episode under `GAMMA = LAMBDA =
/// 1`. The textbook recursion `delta_t = r_t + gamma V_{t+1} - V_t`,
/// `A_t = delta_t + gamma lambda A_{t+1}` telescopes to
/// `A_t = sum_{t' >= t} r_{t'} - V_t`; returns are the same sums.
pub fn gae(rewards: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len(), "one value per step");
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut returns = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + GAMMA * next_value - values[t];
        next_adv = delta + GAMMA * LAMBDA * next_adv;
        advantages[t] = next_adv;
        returns[t] = advantages[t] + values[t];
        next_value = values[t];
    }
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grpo_hand_case_with_zero_floor() {
        let adv = grpo_advantages(&[1.0, 0.0, 1.0, 0.0], 0.0);
        assert_eq!(adv, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn grpo_mean_is_zero_and_shift_invariant() {
        let rewards = [0.75, 0.25, 0.5, 1.0, 0.0];
        let adv = grpo_advantages(&rewards, 1e-8);
        let mean: f64 = adv.iter().sum::<f64>() / adv.len() as f64;
        assert!(mean.abs() < 1e-12);

        let shifted: Vec<f64> = rewards.iter().map(|r| r + 17.0).collect();
        let adv_shifted = grpo_advantages(&shifted, 1e-8);
        for (a, b) in adv.iter().zip(&adv_shifted) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_group_collapses_to_zero_with_floor() {
        let adv = grpo_advantages(&[0.5, 0.5, 0.5, 0.5], 1e-8);
        assert!(adv.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn reinforcepp_hand_case() {
        let adv = reinforcepp_advantages(&[2.0, 0.0], &[0.0, 0.0], 0.01, 0.0);
        assert_eq!(adv, vec![1.0, -1.0]);
    }

    #[test]
    fn reinforcepp_shapes_with_kl_before_standardizing() {
        // Shaped returns: [2 - 1, 0 - 0] = [1, 0]; mean 0.5, pop std 0.5.
        let adv = reinforcepp_advantages(&[2.0, 0.0], &[100.0, 0.0], 0.01, 0.0);
        assert_eq!(adv, vec![1.0, -1.0]);
        // Asymmetric KL flips the ordering when large enough.
        let adv = reinforcepp_advantages(&[2.0, 0.0], &[300.0, 0.0], 0.01, 0.0);
        assert_eq!(adv, vec![-1.0, 1.0]);
    }

    #[test]
    fn gae_single_step() {
        let (adv, ret) = gae(&[1.0], &[0.0]);
        assert_eq!(adv, vec![1.0]);
        assert_eq!(ret, vec![1.0]);
    }

    #[test]
    fn gae_telescopes_to_return_minus_value() {
        let rewards = [-0.01, -0.02, 0.0, 0.9];
        let values = [0.3, 0.2, 0.5, 0.1];
        let (adv, ret) = gae(&rewards, &values);
        for t in 0..rewards.len() {
            let suffix: f64 = rewards[t..].iter().sum();
            assert!((ret[t] - suffix).abs() < 1e-12);
            assert!((adv[t] - (suffix - values[t])).abs() < 1e-12);
        }
    }
}
