//! Hard instance pair and information-theoretic helpers for regret lower
//! bounds of single-constraint bandits.

use serde::Serialize;

use crate::error::{BanditError, Result};
use crate::instance::{MabInstance, NoiseKind};
use crate::policy::Policy;

/// Reward unit of the construction.
pub const GAP_UNIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianPairInstance {
    pub nu: MabInstance,
    pub nu_prime: MabInstance,
    /// `tau - safe_cost`.
    pub c: f64,
    pub delta: f64,
}

impl GaussianPairInstance {
    pub fn num_arms(&self) -> usize {
        self.nu.num_arms()
    }

    /// `max(sqrt((K - 1) T) / 27, 1 / (6 (tau - safe_cost)^2))`.
    pub fn regret_scale(&self, horizon: u64) -> f64 {
        regret_scale(self.num_arms(), horizon, self.c)
    }

    /// Whether `T >= max(K - 1, 24 e B)`.
    pub fn horizon_precondition(&self, horizon: u64) -> bool {
        let t = horizon as f64;
        t >= (self.num_arms() - 1) as f64
            && t >= 24.0 * std::f64::consts::E * self.regret_scale(horizon)
    }

    /// KL divergence between the two instances' `(cost, reward)` laws, per arm.
    pub fn per_arm_kl(&self) -> Vec<f64> {
        (0..self.num_arms())
            .map(|a| {
                let p = [self.nu.mean_costs[0][a], self.nu.mean_rewards[a]];
                let q = [
                    self.nu_prime.mean_costs[0][a],
                    self.nu_prime.mean_rewards[a],
                ];
                gaussian_kl(&p, &q).expect("equal dimensions")
            })
            .collect()
    }
}

pub fn regret_scale(num_arms: usize, horizon: u64, gap: f64) -> f64 {
    let a = (((num_arms - 1) as f64) * horizon as f64).sqrt() / 27.0;
    let b = 1.0 / (6.0 * gap * gap);
    a.max(b)
}

/// Builds the pair of Gaussian instances. Rewards go up to `4` and are
/// therefore validated with the relaxed range check.
pub fn build_instance_pair(
    num_arms: usize,
    tau: f64,
    safe_cost: f64,
) -> Result<GaussianPairInstance> {
    if num_arms < 4 {
        return Err(BanditError::Domain(format!(
            "need at least 4 arms, got {num_arms}"
        )));
    }
    if !(0.0 < safe_cost && safe_cost < tau && tau < 1.0) {
        return Err(BanditError::Domain(format!(
            "need 0 < safe_cost < tau < 1, got safe_cost = {safe_cost}, tau = {tau}"
        )));
    }
    let c = tau - safe_cost;
    let d = GAP_UNIT;
    let low = tau - c;
    let high = tau + 2.0 * c;

    let mut costs = vec![high; num_arms];
    let mut rewards = vec![4.0 * d; num_arms];
    costs[0] = low;
    rewards[0] = d;
    rewards[1] = 8.0 * d;
    costs[2] = low;
    rewards[2] = 0.0;

    let mut costs_prime = costs.clone();
    costs_prime[2] = 0.0;
    costs_prime[3] = low;

    let make = |costs: Vec<f64>| -> Result<MabInstance> {
        let inst = MabInstance {
            mean_rewards: rewards.clone(),
            mean_costs: vec![costs],
            thresholds: vec![tau],
            safe_arm: 0,
            reward_kind: NoiseKind::GaussianUnitVar,
            cost_kind: NoiseKind::GaussianUnitVar,
        };
        inst.validate(false)?;
        Ok(inst)
    };
    Ok(GaussianPairInstance {
        nu: make(costs)?,
        nu_prime: make(costs_prime)?,
        c,
        delta: d,
    })
}

/// Optimal policy and value of the true-mean LP of an instance.
pub fn optimal_value(instance: &MabInstance) -> Result<(Policy, f64)> {
    crate::sim::true_optimal_policy(instance)
}

/// KL divergence between `N(mu1, I)` and `N(mu2, I)`.
pub fn gaussian_kl(mu1: &[f64], mu2: &[f64]) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(BanditError::DimensionMismatch {
            expected: mu1.len(),
            got: mu2.len(),
        });
    }
    Ok(mu1
        .iter()
        .zip(mu2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / 2.0)
}

/// KL divergence between Bernoulli(x) and Bernoulli(y), with `0 log 0 = 0`.
pub fn binary_relative_entropy(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(BanditError::Domain(format!("x = {x} outside [0, 1]")));
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(BanditError::Domain(format!("y = {y} outside (0, 1)")));
    }
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    Ok(term(x, y) + term(1.0 - x, 1.0 - y))
}

/// `sum_a E[T_a] KL_a`.
pub fn divergence_decomposition(expected_counts: &[f64], per_arm_kls: &[f64]) -> Result<f64> {
    if expected_counts.len() != per_arm_kls.len() {
        return Err(BanditError::LengthMismatch(format!(
            "{} counts for {} divergences",
            expected_counts.len(),
            per_arm_kls.len()
        )));
    }
    if expected_counts
        .iter()
        .chain(per_arm_kls)
        .any(|v| !(*v >= 0.0))
    {
        return Err(BanditError::Domain(
            "counts and divergences must be >= 0".into(),
        ));
    }
    Ok(expected_counts
        .iter()
        .zip(per_arm_kls)
        .map(|(n, k)| n * k)
        .sum())
}

/// `|(1/2) / (1/2 + x + delta) - (1/2) / (1/2 + x)|`.
pub fn inverse_prob_gap(x: f64, delta: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&x) {
        return Err(BanditError::Domain(format!("x = {x} outside [0, 1/2]")));
    }
    if !(-0.25..=0.25).contains(&delta) {
        return Err(BanditError::Domain(format!(
            "delta = {delta} outside [-1/4, 1/4]"
        )));
    }
    let den = 0.5 + x + delta;
    if !(den > 0.0) {
        return Err(BanditError::Domain(format!(
            "denominator {den} must be > 0"
        )));
    }
    Ok((0.5 / den - 0.5 / (0.5 + x)).abs())
}

/// Everything the `lower-bound` command reports.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub instances: GaussianPairInstance,
    pub nu_policy: Policy,
    pub nu_value: f64,
    pub nu_prime_policy: Policy,
    pub nu_prime_value: f64,
    pub per_arm_kl: Vec<f64>,
    pub horizon: u64,
    pub regret_scale: f64,
    pub horizon_precondition: bool,
}

pub fn lower_bound_report(
    num_arms: usize,
    tau: f64,
    safe_cost: f64,
    horizon: u64,
) -> Result<LowerBoundReport> {
    let instances = build_instance_pair(num_arms, tau, safe_cost)?;
    let (nu_policy, nu_value) = optimal_value(&instances.nu)?;
    let (nu_prime_policy, nu_prime_value) = optimal_value(&instances.nu_prime)?;
    Ok(LowerBoundReport {
        per_arm_kl: instances.per_arm_kl(),
        regret_scale: instances.regret_scale(horizon),
        horizon_precondition: instances.horizon_precondition(horizon),
        instances,
        nu_policy,
        nu_value,
        nu_prime_policy,
        nu_prime_value,
        horizon,
    })
}
