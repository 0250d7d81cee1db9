//! Policy optimization over a finite action set: single actions plus the
//! boundary mixtures of every pair.

use super::{Estimates, OplbState};
use crate::error::{BanditError, Result};
use crate::linalg::{dot, lerp};
use crate::params::ConfidenceParams;
use crate::policy::Policy;

const MAX_SEARCH_ITERS: usize = 200;

/// Reward and cost values attached to an expected action `x_pi`.
///
/// Both must be convex in `x`; the cost convexity makes the feasible part
/// of every segment an interval.
pub trait PolicyEvaluator {
    fn reward(&self, x: &[f64]) -> f64;
    fn cost(&self, x: &[f64]) -> f64;
}

impl PolicyEvaluator for Estimates {
    fn reward(&self, x: &[f64]) -> f64 {
        self.optimistic_reward(x)
    }

    fn cost(&self, x: &[f64]) -> f64 {
        self.pessimistic_cost(x)
    }
}

/// Linear values from known parameters.
#[derive(Debug, Clone)]
pub struct ExactEvaluator {
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl PolicyEvaluator for ExactEvaluator {
    fn reward(&self, x: &[f64]) -> f64 {
        dot(x, &self.theta)
    }

    fn cost(&self, x: &[f64]) -> f64 {
        dot(x, &self.mu)
    }
}

/// Per-coordinate upper confidence values; on standard-basis actions this is
/// the multi-armed bandit UCB pair.
#[derive(Debug, Clone)]
pub struct ArmUcbEvaluator {
    pub reward_ucb: Vec<f64>,
    pub cost_ucb: Vec<f64>,
}

impl PolicyEvaluator for ArmUcbEvaluator {
    fn reward(&self, x: &[f64]) -> f64 {
        dot(x, &self.reward_ucb)
    }

    fn cost(&self, x: &[f64]) -> f64 {
        dot(x, &self.cost_ucb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub policy: Policy,
    /// Evaluator reward of the expected action.
    pub value: f64,
    /// Whether the safe action was returned because nothing else passed.
    pub fallback: bool,
}

struct Search<'a, E: PolicyEvaluator + ?Sized> {
    eval: &'a E,
    xi: &'a [f64],
    xj: &'a [f64],
    tau: f64,
}

impl<E: PolicyEvaluator + ?Sized> Search<'_, E> {
    // weight eta on x_i
    fn cost(&self, eta: f64) -> f64 {
        self.eval.cost(&lerp(eta, self.xi, self.xj))
    }

    fn feasible(&self, eta: f64) -> bool {
        self.cost(eta) <= self.tau
    }

    /// Bisection between a feasible and an infeasible weight; returns the
    /// feasible end once the bracket can no longer shrink.
    fn boundary(&self, mut good: f64, mut bad: f64) -> f64 {
        for _ in 0..MAX_SEARCH_ITERS {
            let mid = 0.5 * (good + bad);
            if mid == good || mid == bad {
                break;
            }
            if self.feasible(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }

    /// Golden-section minimizer of the convex cost on `[0, 1]`.
    fn argmin(&self) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.cost(c), self.cost(d));
        for _ in 0..MAX_SEARCH_ITERS {
            if b - a <= 1e-15 {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.cost(d);
            }
        }
        0.5 * (a + b)
    }

    /// Ends of the feasible interval that lie strictly inside the segment,
    /// given the feasibility of `eta = 0` and `eta = 1`.
    fn interval_ends(&self, f0: bool, f1: bool) -> Vec<f64> {
        match (f0, f1) {
            (true, true) => Vec::new(),
            (true, false) => vec![self.boundary(0.0, 1.0)],
            (false, true) => vec![self.boundary(1.0, 0.0)],
            (false, false) => {
                let m = self.argmin();
                if self.feasible(m) {
                    vec![self.boundary(m, 0.0), self.boundary(m, 1.0)]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

struct Best {
    policy: Policy,
    value: f64,
}

fn offer(best: &mut Option<Best>, policy: Policy, value: f64) {
    let better = match best {
        None => true,
        Some(b) => {
            value > b.value || (value == b.value && policy.support_size() > b.policy.support_size())
        }
    };
    if better {
        *best = Some(Best { policy, value });
    }
}

/// Maximizes the evaluator reward over single actions and pair boundary
/// mixtures whose evaluator cost is at most `tau`; falls back to the safe
/// action when no candidate qualifies.
pub fn select_policy<E: PolicyEvaluator + ?Sized>(
    eval: &E,
    actions: &[Vec<f64>],
    tau: f64,
    safe_index: usize,
) -> Result<Selection> {
    if actions.is_empty() {
        return Err(BanditError::InvalidInstance("empty action set".into()));
    }
    if safe_index >= actions.len() {
        return Err(BanditError::InvalidInstance(format!(
            "safe index {safe_index} out of range for {} actions",
            actions.len()
        )));
    }
    let feasible: Vec<bool> = actions.iter().map(|x| eval.cost(x) <= tau).collect();
    let mut best: Option<Best> = None;
    for (i, x) in actions.iter().enumerate() {
        if feasible[i] {
            offer(&mut best, Policy::point_mass(i), eval.reward(x));
        }
    }
    for i in 0..actions.len() {
        for j in (i + 1)..actions.len() {
            let search = Search {
                eval,
                xi: &actions[i],
                xj: &actions[j],
                tau,
            };
            for eta in search.interval_ends(feasible[j], feasible[i]) {
                let policy = if eta >= 1.0 {
                    Policy::point_mass(i)
                } else if eta <= 0.0 {
                    Policy::point_mass(j)
                } else {
                    Policy::new(vec![(i, eta), (j, 1.0 - eta)])?
                };
                let value = eval.reward(&lerp(eta, &actions[i], &actions[j]));
                offer(&mut best, policy, value);
            }
        }
    }
    Ok(match best {
        Some(b) => Selection {
            policy: b.policy,
            value: b.value,
            fallback: false,
        },
        None => Selection {
            policy: Policy::point_mass(safe_index),
            value: eval.reward(&actions[safe_index]),
            fallback: true,
        },
    })
}

/// One OPLB policy choice from the current statistics.
pub fn oplb_select_policy(
    state: &OplbState,
    actions: &[Vec<f64>],
    tau: f64,
    params: &ConfidenceParams,
    safe_index: usize,
) -> Result<Selection> {
    let est = Estimates::new(state, params);
    select_policy(&est, actions, tau, safe_index)
}
