//! Ground-truth environments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};
use crate::linalg::{dot, norm};

/// Tolerance used when checking the `[0, 1]` range of means and the norm bounds.
const RANGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Bernoulli,
    #[serde(alias = "gaussian")]
    GaussianUnitVar,
}

impl NoiseKind {
    fn draw<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseKind::GaussianUnitVar => {
                let z: f64 = rng.sample(StandardNormal);
                mean + z
            }
        }
    }
}

/// K-armed instance with m linear cost constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabInstance {
    #[serde(rename = "rewards")]
    pub mean_rewards: Vec<f64>,
    /// `m x K`: one row per constraint.
    #[serde(rename = "costs")]
    pub mean_costs: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub safe_arm: usize,
    pub reward_kind: NoiseKind,
    pub cost_kind: NoiseKind,
}

impl MabInstance {
    pub fn new(
        mean_rewards: Vec<f64>,
        mean_costs: Vec<Vec<f64>>,
        thresholds: Vec<f64>,
        safe_arm: usize,
        reward_kind: NoiseKind,
        cost_kind: NoiseKind,
    ) -> Result<Self> {
        let inst = MabInstance {
            mean_rewards,
            mean_costs,
            thresholds,
            safe_arm,
            reward_kind,
            cost_kind,
        };
        inst.validate(true)?;
        Ok(inst)
    }

    /// Single-constraint Bernoulli instance.
    pub fn bernoulli(
        rewards: Vec<f64>,
        costs: Vec<f64>,
        tau: f64,
        safe_arm: usize,
    ) -> Result<Self> {
        Self::new(
            rewards,
            vec![costs],
            vec![tau],
            safe_arm,
            NoiseKind::Bernoulli,
            NoiseKind::Bernoulli,
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: MabInstance = serde_json::from_str(s)?;
        inst.validate(true)?;
        Ok(inst)
    }

    pub fn num_arms(&self) -> usize {
        self.mean_rewards.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.thresholds.len()
    }

    /// Known cost of the safe arm, one entry per constraint.
    pub fn safe_costs(&self) -> Vec<f64> {
        self.mean_costs
            .iter()
            .map(|row| row[self.safe_arm])
            .collect()
    }

    /// Structural checks. With `strict`, means must also lie in `[0, 1]`.
    pub fn validate(&self, strict: bool) -> Result<()> {
        let k = self.num_arms();
        let m = self.num_constraints();
        let bad = |msg: String| Err(BanditError::InvalidInstance(msg));
        if k == 0 {
            return bad("need at least one arm".into());
        }
        if m == 0 {
            return bad("need at least one constraint".into());
        }
        if self.mean_costs.len() != m {
            return bad(format!(
                "{} cost rows for {m} thresholds",
                self.mean_costs.len()
            ));
        }
        if let Some(row) = self.mean_costs.iter().find(|r| r.len() != k) {
            return bad(format!("cost row has {} entries, expected {k}", row.len()));
        }
        if self.safe_arm >= k {
            return bad(format!("safe arm {} out of range", self.safe_arm));
        }
        let all = self
            .mean_rewards
            .iter()
            .chain(self.mean_costs.iter().flatten())
            .chain(&self.thresholds);
        for &v in all {
            if !v.is_finite() {
                return bad(format!("non-finite value {v}"));
            }
        }
        if let Some(t) = self.thresholds.iter().find(|&&t| t < 0.0) {
            return bad(format!("negative threshold {t}"));
        }
        if strict {
            let means = self
                .mean_rewards
                .iter()
                .chain(self.mean_costs.iter().flatten());
            for &v in means {
                if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                    return bad(format!("mean {v} outside [0, 1]"));
                }
            }
        }
        for (i, (row, &tau)) in self.mean_costs.iter().zip(&self.thresholds).enumerate() {
            if row[self.safe_arm] >= tau {
                return bad(format!(
                    "safe arm cost {} not below threshold {tau} (constraint {i})",
                    row[self.safe_arm]
                ));
            }
        }
        Ok(())
    }

    /// True expected cost of `policy`, one entry per constraint.
    pub fn policy_costs(&self, policy: &crate::Policy) -> Result<Vec<f64>> {
        self.mean_costs
            .iter()
            .map(|row| policy.expectation(row))
            .collect()
    }
}

/// One reward and one cost draw per constraint for `arm`.
pub fn draw_reward_cost<R: Rng + ?Sized>(
    instance: &MabInstance,
    arm: usize,
    rng: &mut R,
) -> (f64, Vec<f64>) {
    let reward = instance.reward_kind.draw(instance.mean_rewards[arm], rng);
    let costs = instance
        .mean_costs
        .iter()
        .map(|row| instance.cost_kind.draw(row[arm], rng))
        .collect();
    (reward, costs)
}

/// Norm bounds and noise scale of a linear instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBounds {
    /// Bound on parameter norms.
    pub s: f64,
    /// Bound on action norms.
    pub l: f64,
    /// Sub-Gaussian noise scale; observations use `N(mean, r^2)`.
    pub r: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct LinearInstanceJson {
    theta_star: Vec<f64>,
    mu_star: Vec<f64>,
    #[serde(default)]
    actions: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    action_sets: Option<Vec<Vec<Vec<f64>>>>,
    x0: Vec<f64>,
    tau: f64,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    l: Option<f64>,
    #[serde(default)]
    r: Option<f64>,
}

/// Constrained linear bandit with finite per-round action sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearInstance {
    pub theta_star: Vec<f64>,
    pub mu_star: Vec<f64>,
    /// Round `t` (0-based) uses `action_sets[t % len]`.
    pub action_sets: Vec<Vec<Vec<f64>>>,
    pub tau: f64,
    pub x0: Vec<f64>,
    pub c0: f64,
    pub bounds: LinearBounds,
}

impl LinearInstance {
    /// Builds and validates an instance; `c0` is derived as `<x0, mu_star>`.
    pub fn new(
        theta_star: Vec<f64>,
        mu_star: Vec<f64>,
        action_sets: Vec<Vec<Vec<f64>>>,
        x0: Vec<f64>,
        tau: f64,
        bounds: LinearBounds,
    ) -> Result<Self> {
        let c0 = if x0.len() == mu_star.len() {
            dot(&x0, &mu_star)
        } else {
            f64::NAN
        };
        let inst = LinearInstance {
            theta_star,
            mu_star,
            action_sets,
            tau,
            x0,
            c0,
            bounds,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Parses the JSON config. Missing bounds default to the tightest values
    /// consistent with the instance and `r = 1`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: LinearInstanceJson = serde_json::from_str(s)?;
        let sets = match (raw.actions, raw.action_sets) {
            (Some(a), None) => vec![a],
            (None, Some(sets)) => sets,
            _ => {
                return Err(BanditError::InvalidInstance(
                    "exactly one of `actions` or `action_sets` is required".into(),
                ))
            }
        };
        let s_bound = raw
            .s
            .unwrap_or_else(|| norm(&raw.theta_star).max(norm(&raw.mu_star)));
        let l_bound = raw
            .l
            .unwrap_or_else(|| sets.iter().flatten().map(|x| norm(x)).fold(0.0, f64::max));
        let bounds = LinearBounds {
            s: s_bound,
            l: l_bound,
            r: raw.r.unwrap_or(1.0),
        };
        LinearInstance::new(raw.theta_star, raw.mu_star, sets, raw.x0, raw.tau, bounds)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn action_set(&self, round: usize) -> &[Vec<f64>] {
        &self.action_sets[round % self.action_sets.len()]
    }

    /// Position of `x0` inside the action set used at `round`.
    pub fn safe_index(&self, round: usize) -> usize {
        self.action_set(round)
            .iter()
            .position(|x| x == &self.x0)
            .expect("validated: x0 present in every action set")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BanditError::InvalidInstance(msg));
        let d = self.theta_star.len();
        if d == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.mu_star.len() != d || self.x0.len() != d {
            return bad("theta_star, mu_star and x0 must share one dimension".into());
        }
        if self.action_sets.is_empty() || self.action_sets.iter().any(Vec::is_empty) {
            return bad("action sets must be non-empty".into());
        }
        let b = self.bounds;
        if !(b.s > 0.0 && b.l > 0.0 && b.r >= 0.0) {
            return bad(format!(
                "bounds must satisfy S > 0, L > 0, R >= 0; got {b:?}"
            ));
        }
        if norm(&self.x0) == 0.0 {
            return bad("safe action x0 must be non-zero".into());
        }
        if norm(&self.theta_star) > b.s + RANGE_TOL || norm(&self.mu_star) > b.s + RANGE_TOL {
            return bad(format!("parameter norm exceeds S = {}", b.s));
        }
        for set in &self.action_sets {
            if !set.contains(&self.x0) {
                return bad("x0 must belong to every action set".into());
            }
            for x in set {
                if x.len() != d {
                    return bad(format!("action of length {}, expected {d}", x.len()));
                }
                if norm(x) > b.l + RANGE_TOL {
                    return bad(format!("action norm {} exceeds L = {}", norm(x), b.l));
                }
                for v in [dot(x, &self.theta_star), dot(x, &self.mu_star)] {
                    if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                        return bad(format!("mean {v} outside [0, 1]"));
                    }
                }
            }
        }
        if !(self.tau >= 0.0) {
            return bad(format!("threshold {} must be >= 0", self.tau));
        }
        if self.c0 >= self.tau {
            return bad(format!(
                "safe cost {} not below threshold {}",
                self.c0, self.tau
            ));
        }
        Ok(())
    }

    /// Draws `(reward, cost)` for action `x` with Gaussian noise of scale `R`.
    pub fn draw<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> (f64, f64) {
        let zr: f64 = rng.sample(StandardNormal);
        let zc: f64 = rng.sample(StandardNormal);
        let r = self.bounds.r;
        (
            dot(x, &self.theta_star) + r * zr,
            dot(x, &self.mu_star) + r * zc,
        )
    }

    /// The `K`-armed instance as a linear bandit over standard basis vectors.
    /// Uses the first constraint only.
    pub fn standard_basis_embedding(mab: &MabInstance) -> Result<Self> {
        let k = mab.num_arms();
        let actions: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                let mut e = vec![0.0; k];
                e[a] = 1.0;
                e
            })
            .collect();
        let x0 = actions[mab.safe_arm].clone();
        let theta = mab.mean_rewards.clone();
        let mu = mab.mean_costs[0].clone();
        let bounds = LinearBounds {
            s: norm(&theta).max(norm(&mu)).max(f64::MIN_POSITIVE),
            l: 1.0,
            r: 1.0,
        };
        LinearInstance::new(theta, mu, vec![actions], x0, mab.thresholds[0], bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    fn experiment(tau: f64) -> MabInstance {
        MabInstance::bernoulli(vec![0.1, 0.2, 0.4, 0.7], vec![0.0, 0.4, 0.5, 0.2], tau, 0).unwrap()
    }

    #[test]
    fn parses_json_document() {
        let s = r#"{"rewards":[0.1,0.2,0.4,0.7],"costs":[[0,0.4,0.5,0.2]],"thresholds":[0.5],
                   "safe_arm":0,"reward_kind":"bernoulli","cost_kind":"bernoulli"}"#;
        let inst = MabInstance::from_json_str(s).unwrap();
        assert_eq!(inst, experiment(0.5));
        assert_eq!(inst.safe_costs(), vec![0.0]);
    }

    #[test]
    fn json_errors_carry_position() {
        let err = MabInstance::from_json_str("{\"rewards\": [0.1,\n oops]}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn rejects_unsafe_safe_arm() {
        let err = MabInstance::bernoulli(vec![0.5, 0.5], vec![0.6, 0.1], 0.5, 0).unwrap_err();
        assert!(matches!(err, BanditError::InvalidInstance(_)));
    }

    #[test]
    fn strictness_controls_mean_range() {
        let inst = MabInstance {
            mean_rewards: vec![0.5, 4.0],
            mean_costs: vec![vec![0.3, 0.9]],
            thresholds: vec![0.5],
            safe_arm: 0,
            reward_kind: NoiseKind::GaussianUnitVar,
            cost_kind: NoiseKind::GaussianUnitVar,
        };
        assert!(inst.validate(true).is_err());
        assert!(inst.validate(false).is_ok());
    }

    #[test]
    fn degenerate_bernoulli_draws() {
        let inst = MabInstance::bernoulli(vec![0.0, 1.0], vec![0.0, 1.0], 0.5, 0).unwrap();
        let mut rng = replicate_rng(1, 0);
        for _ in 0..500 {
            assert_eq!(draw_reward_cost(&inst, 0, &mut rng), (0.0, vec![0.0]));
            assert_eq!(draw_reward_cost(&inst, 1, &mut rng), (1.0, vec![1.0]));
        }
    }

    #[test]
    fn gaussian_sample_mean() {
        let inst = MabInstance::new(
            vec![0.5],
            vec![vec![0.2]],
            vec![0.5],
            0,
            NoiseKind::GaussianUnitVar,
            NoiseKind::GaussianUnitVar,
        )
        .unwrap();
        let mut rng = replicate_rng(5, 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| draw_reward_cost(&inst, 0, &mut rng).0)
            .sum::<f64>()
            / n as f64;
        // 3 sigma / sqrt(n) is about 0.0095
        assert!((mean - 0.5).abs() <= 0.02, "{mean}");
    }

    #[test]
    fn safe_arm_point_mass_is_strictly_feasible() {
        for tau in [1.0, 0.5, 0.2] {
            let inst = experiment(tau);
            let p = crate::Policy::point_mass(inst.safe_arm);
            let costs = inst.policy_costs(&p).unwrap();
            assert!(costs.iter().zip(&inst.thresholds).all(|(c, t)| c < t));
        }
    }

    #[test]
    fn linear_instance_validation() {
        let bounds = LinearBounds {
            s: 1.0,
            l: 1.0,
            r: 1.0,
        };
        let set = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ok = LinearInstance::new(
            vec![0.2, 0.8],
            vec![0.1, 0.6],
            vec![set.clone()],
            vec![1.0, 0.0],
            0.5,
            bounds,
        )
        .unwrap();
        assert!((ok.c0 - 0.1).abs() < 1e-15);
        assert_eq!(ok.safe_index(3), 0);

        // c0 >= tau
        assert!(LinearInstance::new(
            vec![0.2, 0.8],
            vec![0.6, 0.1],
            vec![set.clone()],
            vec![1.0, 0.0],
            0.5,
            bounds
        )
        .is_err());
        // x0 missing from the set
        assert!(LinearInstance::new(
            vec![0.2, 0.8],
            vec![0.1, 0.6],
            vec![set],
            vec![0.5, 0.0],
            0.5,
            bounds
        )
        .is_err());
    }

    #[test]
    fn linear_json_defaults_bounds() {
        let s = r#"{"theta_star":[0.3,0.4],"mu_star":[0.1,0.5],
                    "actions":[[1,0],[0,1],[0.6,0.6]],"x0":[1,0],"tau":0.4}"#;
        let inst = LinearInstance::from_json_str(s).unwrap();
        assert!((inst.bounds.s - 0.5f64.hypot(0.1)).abs() < 1e-12);
        // the unit basis vectors are longer than (0.6, 0.6)
        assert_eq!(inst.bounds.l, 1.0);
        assert_eq!(inst.bounds.r, 1.0);
    }
}
