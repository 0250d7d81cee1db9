//! Warm start for an unknown safe cost: play `x0` until its cost estimate is
//! confidently below the threshold, then size the alphas from the gap.

use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeCostEstimate {
    /// Rounds spent on `x0` before the rule fired.
    pub rounds: u64,
    /// Estimate of the gap `tau - c0`.
    pub delta_hat: f64,
}

/// `3 sqrt(2 log(T^2) / t)`.
pub fn stopping_margin(t: u64, horizon: u64) -> f64 {
    let log_inv_delta = 2.0 * (horizon as f64).ln();
    3.0 * (2.0 * log_inv_delta / t as f64).sqrt()
}

/// Incremental form of the stopping rule.
#[derive(Debug, Clone)]
pub struct SafeCostStopper {
    tau: f64,
    horizon: u64,
    n: u64,
    sum: f64,
}

impl SafeCostStopper {
    pub fn new(tau: f64, horizon: u64) -> Self {
        SafeCostStopper {
            tau,
            horizon,
            n: 0,
            sum: 0.0,
        }
    }

    pub fn rounds(&self) -> u64 {
        self.n
    }

    /// Adds one cost observation of `x0`; returns the estimate once the
    /// empirical mean plus margin drops to `tau`.
    pub fn push(&mut self, cost: f64) -> Option<SafeCostEstimate> {
        self.n += 1;
        self.sum += cost;
        let mean = self.sum / self.n as f64;
        if mean + stopping_margin(self.n, self.horizon) <= self.tau {
            let log_inv_delta = 2.0 * (self.horizon as f64).ln();
            Some(SafeCostEstimate {
                rounds: self.n,
                delta_hat: (8.0 * log_inv_delta / self.n as f64).sqrt(),
            })
        } else {
            None
        }
    }
}

/// Runs the stopping rule over at most `horizon` cost draws of `x0`.
pub fn estimate_safe_cost_gap(
    costs: impl IntoIterator<Item = f64>,
    tau: f64,
    horizon: u64,
) -> Result<SafeCostEstimate> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(BanditError::Domain(format!(
            "threshold {tau} not in (0, 1]"
        )));
    }
    let mut stopper = SafeCostStopper::new(tau, horizon);
    for c in costs.into_iter().take(horizon as usize) {
        if let Some(est) = stopper.push(c) {
            return Ok(est);
        }
    }
    Err(BanditError::EstimationTimeout { horizon })
}

/// `alpha_c = 1` and `alpha_r = alpha_c / delta_hat`.
pub fn unknown_c0_alphas(delta_hat: f64) -> (f64, f64) {
    let alpha_c = 1.0;
    ((alpha_c / delta_hat).max(1.0), alpha_c)
}
