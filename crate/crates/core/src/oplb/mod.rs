//! OPLB: constrained linear bandits over finite action sets.
//!
//! Rewards are estimated by ridge regression in the full space. Costs are
//! estimated only on the complement of the safe action `x0`, since the cost
//! along `x0` is known; this lets the cost confidence set use a
//! `(d - 1)`-dimensional radius.

mod select;
mod state;
mod unknown_c0;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{BanditError, Result};
use crate::instance::LinearInstance;
use crate::params::ConfidenceParams;

pub use select::{
    oplb_select_policy, select_policy, ArmUcbEvaluator, ExactEvaluator, PolicyEvaluator, Selection,
};
pub use state::{CostModel, OplbState};
pub use unknown_c0::{
    estimate_safe_cost_gap, stopping_margin, unknown_c0_alphas, SafeCostEstimate, SafeCostStopper,
};

/// `(<x, e0> e0, x - <x, e0> e0)`.
pub fn project_safe(x: &[f64], e0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let along: f64 = x.iter().zip(e0).map(|(a, b)| a * b).sum();
    let x_o: Vec<f64> = e0.iter().map(|e| along * e).collect();
    let x_perp = x.iter().zip(&x_o).map(|(a, b)| a - b).collect();
    (x_o, x_perp)
}

/// Cost observation with the known safe-direction contribution removed.
pub fn projected_cost(cost: f64, x: &[f64], e0: &[f64], x0_norm: f64, c0: f64) -> f64 {
    let along: f64 = x.iter().zip(e0).map(|(a, b)| a * b).sum();
    cost - along * c0 / x0_norm
}

/// `R sqrt(d log((1 + (t - 1) L^2 / lambda) / delta)) + sqrt(lambda) S`.
pub fn ellipsoid_radius(
    t: u64,
    delta: f64,
    dim: usize,
    r: f64,
    l: f64,
    lambda: f64,
    s: f64,
) -> f64 {
    let growth = 1.0 + (t.saturating_sub(1)) as f64 * l * l / lambda;
    r * (dim as f64 * (growth / delta).ln()).sqrt() + lambda.sqrt() * s
}

/// `alpha_c = 1`, `alpha_r = (2 + tau - c0) / (tau - c0)`.
pub fn default_alphas_linear(tau: f64, c0: f64) -> Result<(f64, f64)> {
    let gap = tau - c0;
    if !(gap > 0.0) {
        return Err(BanditError::InvalidInstance(format!(
            "safe cost {c0} not below threshold {tau}"
        )));
    }
    Ok(((2.0 + gap) / gap, 1.0))
}

pub(crate) fn weighted_norm(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x)).max(0.0).sqrt()
}

/// `{ v : ||v - center||_gram <= radius }`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidSpec {
    pub center: DVector<f64>,
    pub gram: DMatrix<f64>,
    pub radius: f64,
}

impl EllipsoidSpec {
    /// Maximizer of `<x, v>` over the ellipsoid.
    pub fn maximizer(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        let inv = self
            .gram
            .clone()
            .cholesky()
            .expect("gram is positive definite")
            .inverse();
        let n = weighted_norm(&inv, &xv);
        if n == 0.0 {
            return self.center.clone();
        }
        &self.center + (&inv * &xv) * (self.radius / n)
    }

    /// `max_v <x, v> = <x, center> + radius ||x||_{gram^-1}`.
    pub fn support(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let inv = self
            .gram
            .clone()
            .cholesky()
            .expect("gram is positive definite")
            .inverse();
        xv.dot(&self.center) + self.radius * weighted_norm(&inv, &xv)
    }
}

/// Reward confidence set scaled by `alpha_r`.
pub fn reward_ellipsoid(state: &OplbState, params: &ConfidenceParams) -> EllipsoidSpec {
    let beta = radius_at(state, params, state.dim());
    EllipsoidSpec {
        center: state.theta_hat(),
        gram: state.sigma.clone(),
        radius: params.alpha_r * beta,
    }
}

fn radius_at(state: &OplbState, params: &ConfidenceParams, dim: usize) -> f64 {
    ellipsoid_radius(
        state.n_obs + 1,
        params.delta,
        dim,
        params.r,
        params.l,
        params.lambda,
        params.s,
    )
}

/// Per-round snapshot of the estimators, inverses and scaled radii.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub theta_hat: DVector<f64>,
    pub mu_hat: DVector<f64>,
    pub sigma_inv: DMatrix<f64>,
    /// `pinv(sigma_perp)` in the projected model, `sigma^-1` otherwise.
    pub cost_inv: DMatrix<f64>,
    pub reward_radius: f64,
    pub cost_radius: f64,
    e0: DVector<f64>,
    safe_slope: Option<f64>,
}

impl Estimates {
    pub fn new(state: &OplbState, params: &ConfidenceParams) -> Self {
        let d = state.dim();
        let sigma_inv = state.sigma_inv();
        let (cost_inv, cost_dim, safe_slope) = match (state.cost_model, state.c0) {
            (CostModel::Projected, Some(c0)) => {
                (state.sigma_perp_pinv(), d - 1, Some(c0 / state.x0_norm))
            }
            _ => (sigma_inv.clone(), d, None),
        };
        Estimates {
            theta_hat: state.theta_hat(),
            mu_hat: state.mu_hat(),
            reward_radius: params.alpha_r * radius_at(state, params, d),
            cost_radius: params.alpha_c * radius_at(state, params, cost_dim),
            sigma_inv,
            cost_inv,
            e0: state.e0.clone(),
            safe_slope,
        }
    }

    pub fn optimistic_reward(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        xv.dot(&self.theta_hat) + self.reward_radius * weighted_norm(&self.sigma_inv, &xv)
    }

    pub fn pessimistic_cost(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        match self.safe_slope {
            Some(slope) => {
                let along = xv.dot(&self.e0);
                let x_perp = &xv - &self.e0 * along;
                along * slope
                    + x_perp.dot(&self.mu_hat)
                    + self.cost_radius * weighted_norm(&self.cost_inv, &x_perp)
            }
            None => xv.dot(&self.mu_hat) + self.cost_radius * weighted_norm(&self.cost_inv, &xv),
        }
    }
}

/// `<x, theta_hat> + alpha_r beta_t(delta, d) ||x||_{sigma^-1}`.
pub fn optimistic_reward(state: &OplbState, x_pi: &[f64], params: &ConfidenceParams) -> f64 {
    Estimates::new(state, params).optimistic_reward(x_pi)
}

/// Known safe-direction cost plus the upper confidence value of the
/// orthogonal part, with the `(d - 1)`-dimensional radius.
pub fn pessimistic_cost(state: &OplbState, x_pi: &[f64], params: &ConfidenceParams) -> f64 {
    Estimates::new(state, params).pessimistic_cost(x_pi)
}

/// A state whose estimates lie inside the (unscaled) confidence sets around
/// the true parameters, after observing `actions` in order.
pub fn event_state<R: Rng + ?Sized>(
    instance: &LinearInstance,
    actions: &[Vec<f64>],
    params: &ConfidenceParams,
    rng: &mut R,
) -> Result<OplbState> {
    let d = instance.dim();
    let mut state = OplbState::new(&instance.x0, instance.c0, params.lambda)?;
    for x in actions {
        state.update(x, 0.0, 0.0)?;
    }
    let shrink = 1.0 - 1e-9;
    let beta_d = radius_at(&state, params, d) * shrink;
    let beta_perp = radius_at(&state, params, d - 1) * shrink;

    // theta_hat = theta* + L^-T w with ||w|| <= beta gives ||theta_hat - theta*||_sigma <= beta
    let w = random_ball(d, beta_d, rng);
    let chol = state
        .sigma
        .clone()
        .cholesky()
        .expect("sigma is positive definite");
    let offset = chol
        .l()
        .transpose()
        .solve_upper_triangular(&w)
        .expect("triangular solve");
    let theta_hat = DVector::from_column_slice(&instance.theta_star) + offset;

    // same construction in rotated coordinates for the orthogonal block
    let mu = DVector::from_column_slice(&instance.mu_star);
    let mu_perp = &mu - &state.e0 * mu.dot(&state.e0);
    let mut mu_hat = mu_perp.clone();
    if d > 1 {
        let h = state.householder().clone();
        let rotated = &h * &state.sigma_perp * &h;
        let block = rotated.view((1, 1), (d - 1, d - 1)).into_owned();
        let chol = ((&block + block.transpose()) * 0.5)
            .cholesky()
            .expect("block is positive definite");
        let w = random_ball(d - 1, beta_perp, rng);
        let tail = chol
            .l()
            .transpose()
            .solve_upper_triangular(&w)
            .expect("triangular solve");
        let mut u = DVector::zeros(d);
        u.rows_mut(1, d - 1).copy_from(&tail);
        mu_hat += h * u;
    }
    state.set_estimates(theta_hat.as_slice(), mu_hat.as_slice())?;
    Ok(state)
}

fn random_ball<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    let dir = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let n = dir.norm();
    if n == 0.0 {
        return DVector::zeros(dim);
    }
    dir * (radius * rng.random::<f64>() / n)
}
