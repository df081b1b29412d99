/// Generalized advantage estimates and returns over a flat rollout.
///
/// `dones[t]` marks the last step of an episode; the value after a terminal
/// step is taken as zero. `last_value` bootstraps a rollout cut mid-episode.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "rollout columns differ in length");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_step_fixture() {
        // direct summation at 30 digits
        let (a, r) = compute_gae(&[1.0, 2.0, 3.0], &[0.5; 3], &[false, false, true], 9.0, 0.9, 0.95);
        let want = [4.4448125, 4.0875, 2.5];
        for (x, w) in a.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
        assert!((r[0] - 4.9448125).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let rewards = [1.0, -2.0, 0.5];
        let values = [0.3, 0.1, -0.4];
        let (a, _) = compute_gae(&rewards, &values, &[false, false, false], 0.7, 0.9, 0.0);
        assert_eq!(a[0], 1.0 + 0.9 * 0.1 - 0.3);
        assert_eq!(a[2], 0.5 + 0.9 * 0.7 - -0.4);
    }

    #[test]
    fn lambda_one_zero_values_is_discounted_return() {
        let (a, r) = compute_gae(&[1.0, 1.0, 1.0], &[0.0; 3], &[false, false, true], 0.0, 0.5, 1.0);
        assert_eq!(a, vec![1.75, 1.5, 1.0]);
        assert_eq!(a, r);
    }
}
