//! OPB: optimistic rewards, pessimistic costs and one policy LP per round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};
use crate::instance::MabInstance;
use crate::lp::{self, LpProblem};
use crate::policy::Policy;

/// Pull counts and running sums for every arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpbState {
    pub pull_counts: Vec<u64>,
    pub reward_sums: Vec<f64>,
    /// `m x K`.
    pub cost_sums: Vec<Vec<f64>>,
    pub round: u64,
}

impl OpbState {
    pub fn new(num_arms: usize, num_constraints: usize) -> Self {
        OpbState {
            pull_counts: vec![0; num_arms],
            reward_sums: vec![0.0; num_arms],
            cost_sums: vec![vec![0.0; num_arms]; num_constraints],
            round: 0,
        }
    }

    pub fn num_arms(&self) -> usize {
        self.pull_counts.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cost_sums.len()
    }

    pub fn mean_reward(&self, arm: usize) -> Option<f64> {
        let n = self.pull_counts[arm];
        (n > 0).then(|| self.reward_sums[arm] / n as f64)
    }

    pub fn mean_cost(&self, constraint: usize, arm: usize) -> Option<f64> {
        let n = self.pull_counts[arm];
        (n > 0).then(|| self.cost_sums[constraint][arm] / n as f64)
    }

    /// Records one observation in place.
    pub fn record(&mut self, arm: usize, reward: f64, costs: &[f64]) -> Result<()> {
        if arm >= self.num_arms() {
            return Err(BanditError::InvalidPolicy(format!(
                "arm {arm} out of range for {} arms",
                self.num_arms()
            )));
        }
        if costs.len() != self.num_constraints() {
            return Err(BanditError::DimensionMismatch {
                expected: self.num_constraints(),
                got: costs.len(),
            });
        }
        self.pull_counts[arm] += 1;
        self.reward_sums[arm] += reward;
        for (row, c) in self.cost_sums.iter_mut().zip(costs) {
            row[arm] += c;
        }
        self.round += 1;
        Ok(())
    }
}

/// Functional form of [`OpbState::record`].
pub fn opb_update(mut state: OpbState, arm: usize, reward: f64, costs: &[f64]) -> Result<OpbState> {
    state.record(arm, reward, costs)?;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpbConfig {
    pub delta_prime: f64,
    pub alpha_r: f64,
    pub alpha_c: f64,
    pub thresholds: Vec<f64>,
    pub safe_arm: usize,
    /// Known cost of the safe arm, one per constraint.
    pub known_safe_costs: Vec<f64>,
    #[serde(default)]
    pub clip_ucb: bool,
}

impl OpbConfig {
    /// Calibrates `delta' = delta / (4 K T)` and falls back to the default
    /// alphas for any that are not given.
    pub fn for_instance(
        instance: &MabInstance,
        delta: f64,
        horizon: u64,
        alpha_r: Option<f64>,
        alpha_c: Option<f64>,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BanditError::Domain(format!("delta {delta} not in (0, 1)")));
        }
        if horizon == 0 {
            return Err(BanditError::Domain("horizon must be >= 1".into()));
        }
        let safe_costs = instance.safe_costs();
        let (dr, dc) = default_alphas(&instance.thresholds, &safe_costs)?;
        let cfg = OpbConfig {
            delta_prime: delta_prime_from_delta(delta, instance.num_arms(), horizon),
            alpha_r: alpha_r.unwrap_or(dr),
            alpha_c: alpha_c.unwrap_or(dc),
            thresholds: instance.thresholds.clone(),
            safe_arm: instance.safe_arm,
            known_safe_costs: safe_costs,
            clip_ucb: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_prime > 0.0 && self.delta_prime < 1.0) {
            return Err(BanditError::Domain(format!(
                "delta' {} not in (0, 1)",
                self.delta_prime
            )));
        }
        if !(self.alpha_r >= 1.0 && self.alpha_c >= 1.0) {
            return Err(BanditError::Domain(format!(
                "alphas must be >= 1, got ({}, {})",
                self.alpha_r, self.alpha_c
            )));
        }
        if self.known_safe_costs.len() != self.thresholds.len() {
            return Err(BanditError::DimensionMismatch {
                expected: self.thresholds.len(),
                got: self.known_safe_costs.len(),
            });
        }
        Ok(())
    }
}

pub fn delta_prime_from_delta(delta: f64, num_arms: usize, horizon: u64) -> f64 {
    delta / (4.0 * num_arms as f64 * horizon as f64)
}

/// `sqrt(2 log(1/delta') / count)`, or `+inf` for an unpulled arm.
pub fn confidence_radius(count: u64, delta_prime: f64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    (2.0 * (1.0 / delta_prime).ln() / count as f64).sqrt()
}

/// Reward UCBs (length `K`) and cost UCBs (`m x K`).
///
/// Unpulled arms get `1` in every coordinate; the safe arm's cost is its
/// known value.
pub fn ucbs(state: &OpbState, config: &OpbConfig) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = state.num_arms();
    let clip = |v: f64| {
        if config.clip_ucb {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    };
    let mut ur = vec![1.0; k];
    let mut uc = vec![vec![1.0; k]; state.num_constraints()];
    for a in 0..k {
        let n = state.pull_counts[a];
        if n == 0 {
            continue;
        }
        let beta = confidence_radius(n, config.delta_prime);
        ur[a] = clip(state.reward_sums[a] / n as f64 + config.alpha_r * beta);
        for (i, row) in uc.iter_mut().enumerate() {
            row[a] = clip(state.cost_sums[i][a] / n as f64 + config.alpha_c * beta);
        }
    }
    for (row, &c) in uc.iter_mut().zip(&config.known_safe_costs) {
        row[config.safe_arm] = c;
    }
    (ur, uc)
}

/// `alpha_c = 1`, `alpha_r = 1 + 2 / min_i (tau_i - c_safe_i)`.
pub fn default_alphas(thresholds: &[f64], safe_costs: &[f64]) -> Result<(f64, f64)> {
    if thresholds.len() != safe_costs.len() || thresholds.is_empty() {
        return Err(BanditError::InvalidInstance(format!(
            "{} thresholds for {} safe costs",
            thresholds.len(),
            safe_costs.len()
        )));
    }
    let gap = thresholds
        .iter()
        .zip(safe_costs)
        .map(|(t, c)| t - c)
        .fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(BanditError::InvalidInstance(format!(
            "safe arm cost must be below every threshold (smallest gap {gap})"
        )));
    }
    Ok((1.0 + 2.0 / gap, 1.0))
}

/// The UCB policy LP for the current statistics.
pub fn ucb_problem(state: &OpbState, config: &OpbConfig) -> Result<LpProblem> {
    let (ur, uc) = ucbs(state, config);
    LpProblem::new(ur, uc, config.thresholds.clone())
}

/// Policy for the next round; the safe arm whenever the UCB LP is infeasible.
pub fn opb_step(state: &OpbState, config: &OpbConfig) -> Result<Policy> {
    let problem = ucb_problem(state, config)?;
    let sol = lp::solve(&problem)?;
    Ok(sol
        .policy
        .unwrap_or_else(|| Policy::point_mass(config.safe_arm)))
}

/// The regret bound of OPB with default alphas after `horizon` rounds.
pub fn opb_regret_bound(num_arms: usize, horizon: u64, tau: f64, delta: f64) -> f64 {
    let k = num_arms as f64;
    let t = horizon as f64;
    let log_kt = (4.0 * k * t / delta).ln();
    (1.0 + 2.0 / tau)
        * (2.0 * (2.0 * k * t * log_kt).sqrt() + 4.0 * (t * (2.0 / delta).ln() * log_kt).sqrt())
}

/// A state on the clean event: every arm has `counts[a] >= 1` pulls and
/// empirical means within the confidence radius of the true means.
pub fn clean_event_state<R: Rng + ?Sized>(
    instance: &MabInstance,
    counts: &[u64],
    delta_prime: f64,
    rng: &mut R,
) -> Result<OpbState> {
    let k = instance.num_arms();
    if counts.len() != k {
        return Err(BanditError::DimensionMismatch {
            expected: k,
            got: counts.len(),
        });
    }
    if counts.contains(&0) {
        return Err(BanditError::Domain(
            "every arm needs at least one pull".into(),
        ));
    }
    let mut state = OpbState::new(k, instance.num_constraints());
    // stay strictly inside the interval so the division in the mean cannot
    // push an estimate past the boundary
    let shrink = 1.0 - 1e-9;
    for (a, &n) in counts.iter().enumerate() {
        let beta = confidence_radius(n, delta_prime) * shrink;
        let mut off = || rng.random_range(-beta..=beta);
        state.pull_counts[a] = n;
        state.reward_sums[a] = (instance.mean_rewards[a] + off()) * n as f64;
        for i in 0..instance.num_constraints() {
            state.cost_sums[i][a] = (instance.mean_costs[i][a] + off()) * n as f64;
        }
    }
    state.round = counts.iter().sum();
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::NoiseKind;
    use crate::lp::solve_single_constraint;
    use crate::rng::replicate_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Binomial, Distribution};

    fn experiment(tau: f64) -> MabInstance {
        MabInstance::bernoulli(vec![0.1, 0.2, 0.4, 0.7], vec![0.0, 0.4, 0.5, 0.2], tau, 0).unwrap()
    }

    fn config(inst: &MabInstance) -> OpbConfig {
        OpbConfig::for_instance(inst, 0.1, 10_000, None, None).unwrap()
    }

    #[test]
    fn radius_examples() {
        assert_abs_diff_eq!(confidence_radius(2, (-1.0f64).exp()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(confidence_radius(8, (-4.0f64).exp()), 1.0, epsilon = 1e-15);
        assert_eq!(confidence_radius(0, 0.1), f64::INFINITY);
        for t in 1..200 {
            assert!(confidence_radius(2 * t, 0.01) < confidence_radius(t, 0.01));
        }
    }

    #[test]
    fn default_alpha_examples() {
        assert_eq!(default_alphas(&[1.0], &[0.0]).unwrap(), (3.0, 1.0));
        assert_abs_diff_eq!(
            default_alphas(&[0.2], &[0.0]).unwrap().0,
            11.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            default_alphas(&[0.5, 0.4], &[0.0, 0.2]).unwrap().0,
            11.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            default_alphas(&[0.3], &[0.3]),
            Err(BanditError::InvalidInstance(_))
        ));
    }

    #[test]
    fn ucb_rules() {
        let inst = experiment(0.5);
        let mut cfg = config(&inst);
        cfg.alpha_r = 2.0;
        let mut state = OpbState::new(4, 1);
        let (ur, uc) = ucbs(&state, &cfg);
        assert_eq!(ur, vec![1.0; 4]);
        assert_eq!(uc, vec![vec![0.0, 1.0, 1.0, 1.0]]);

        // pick delta' so the radius is exactly 0.1 after 200 pulls: 2 ln(1/d) / 200 = 0.01
        cfg.delta_prime = (-1.0f64).exp();
        for i in 0..200 {
            state
                .record(1, if i < 60 { 1.0 } else { 0.0 }, &[0.0])
                .unwrap();
        }
        let (ur, uc) = ucbs(&state, &cfg);
        assert_abs_diff_eq!(ur[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(uc[0][1], 0.1, epsilon = 1e-12);
        assert_eq!(uc[0][0], 0.0);
    }

    #[test]
    fn clipping_keeps_ucbs_in_unit_interval() {
        let inst = experiment(0.5);
        let mut cfg = config(&inst);
        cfg.clip_ucb = true;
        let mut state = OpbState::new(4, 1);
        state.record(2, 1.0, &[1.0]).unwrap();
        let (ur, uc) = ucbs(&state, &cfg);
        assert_eq!(ur[2], 1.0);
        assert_eq!(uc[0][2], 1.0);
    }

    #[test]
    fn update_examples() {
        let s = opb_update(OpbState::new(2, 1), 0, 1.0, &[0.0]).unwrap();
        assert_eq!(s.pull_counts[0], 1);
        assert_eq!(s.mean_reward(0), Some(1.0));
        assert_eq!(s.mean_reward(1), None);
        let s = opb_update(s, 0, 0.0, &[0.0]).unwrap();
        assert_eq!(s.mean_reward(0), Some(0.5));
        assert_eq!(s.pull_counts.iter().sum::<u64>(), s.round);
        assert!(opb_update(s.clone(), 5, 0.0, &[0.0]).is_err());
        assert!(opb_update(s, 0, 0.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn round_zero_mixes_safe_arm_with_an_unexplored_arm() {
        let inst = experiment(0.5);
        let cfg = config(&inst);
        let pol = opb_step(&OpbState::new(4, 1), &cfg).unwrap();
        let (w_safe, w_other) = lp::pair_mixture(0.0, 1.0, 0.5).unwrap();
        assert_eq!(pol.support_size(), 2);
        assert_abs_diff_eq!(pol.weight(0), w_safe, epsilon = 1e-15);
        assert_abs_diff_eq!(pol.weight(1), w_other, epsilon = 1e-15);
        let (_, uc) = ucbs(&OpbState::new(4, 1), &cfg);
        assert!(pol.expectation(&uc[0]).unwrap() <= 0.5 + 1e-9);
    }

    #[test]
    fn converges_to_best_arm_after_many_pulls() {
        let inst = experiment(1.0);
        let cfg = config(&inst);
        let mut rng = replicate_rng(3, 0);
        let n = 1_000_000u64;
        let mut state = OpbState::new(4, 1);
        for a in 0..4 {
            state.pull_counts[a] = n;
            let draw = |p: f64, rng: &mut _| Binomial::new(n, p).unwrap().sample(rng) as f64;
            state.reward_sums[a] = draw(inst.mean_rewards[a], &mut rng);
            state.cost_sums[0][a] = draw(inst.mean_costs[0][a], &mut rng);
        }
        assert_eq!(opb_step(&state, &cfg).unwrap(), Policy::point_mass(3));
    }

    #[test]
    fn zero_radius_reduces_to_true_lp() {
        let inst = experiment(0.2);
        let mut cfg = config(&inst);
        cfg.alpha_r = 0.0;
        cfg.alpha_c = 0.0;
        let mut state = OpbState::new(4, 1);
        for a in 0..4 {
            state.pull_counts[a] = 10;
            state.reward_sums[a] = inst.mean_rewards[a] * 10.0;
            state.cost_sums[0][a] = inst.mean_costs[0][a] * 10.0;
        }
        let truth = LpProblem::new(
            inst.mean_rewards.clone(),
            inst.mean_costs.clone(),
            inst.thresholds.clone(),
        )
        .unwrap();
        let expected = solve_single_constraint(&truth).unwrap().policy.unwrap();
        assert_eq!(opb_step(&state, &cfg).unwrap(), expected);
    }

    #[test]
    fn infeasible_ucb_lp_falls_back_to_safe_arm() {
        let inst = experiment(0.5);
        let mut cfg = config(&inst);
        // a known safe cost above the budget makes every candidate infeasible
        cfg.known_safe_costs = vec![0.9];
        assert_eq!(
            opb_step(&OpbState::new(4, 1), &cfg).unwrap(),
            Policy::point_mass(0)
        );
    }

    #[test]
    fn clean_event_policies_are_optimistic_and_safe() {
        let mut rng = replicate_rng(17, 0);
        for trial in 0..300 {
            let k = rng.random_range(2..=6);
            let m = if trial % 3 == 0 { 2 } else { 1 };
            let rewards: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let mut costs: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..k).map(|_| rng.random()).collect())
                .collect();
            let taus: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            for (row, &t) in costs.iter_mut().zip(&taus) {
                row[0] = rng.random_range(0.0..t * 0.9);
            }
            let inst = MabInstance::new(
                rewards,
                costs,
                taus,
                0,
                NoiseKind::Bernoulli,
                NoiseKind::Bernoulli,
            )
            .unwrap();
            let cfg = OpbConfig::for_instance(&inst, 0.1, 1000, None, None).unwrap();
            let counts: Vec<u64> = (0..k).map(|_| rng.random_range(1..2000)).collect();
            let state = clean_event_state(&inst, &counts, cfg.delta_prime, &mut rng).unwrap();
            let pol = opb_step(&state, &cfg).unwrap();
            let (ur, _) = ucbs(&state, &cfg);
            let truth = LpProblem::new(
                inst.mean_rewards.clone(),
                inst.mean_costs.clone(),
                inst.thresholds.clone(),
            )
            .unwrap();
            let opt = lp::solve(&truth).unwrap().value;
            assert!(pol.expectation(&ur).unwrap() >= opt - 1e-12);
            for (c, t) in inst
                .policy_costs(&pol)
                .unwrap()
                .iter()
                .zip(&inst.thresholds)
            {
                assert!(*c <= t + 1e-9);
            }
        }
    }

    #[test]
    fn regret_bound_grows_as_threshold_shrinks() {
        let b1 = opb_regret_bound(4, 10_000, 1.0, 0.1);
        let b2 = opb_regret_bound(4, 10_000, 0.2, 0.1);
        assert!(b2 > b1 && b1 > 0.0);
        // closed form at tau = 1: 3 (2 sqrt(2KT L) + 4 sqrt(T ln 20 L)), L = ln(1.6e6)
        let l = (1.6e6f64).ln();
        let expect = 3.0 * (2.0 * (8.0e4 * l).sqrt() + 4.0 * (1.0e4 * 20f64.ln() * l).sqrt());
        assert_abs_diff_eq!(b1, expect, epsilon = 1e-9);
    }
}
