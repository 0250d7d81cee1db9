use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};

/// How cost observations enter the cost estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Known `c0`: regress the projected cost on the component orthogonal to `x0`.
    Projected,
    /// Unknown `c0`: regress raw costs on full actions.
    Full,
}

/// Regularized least-squares statistics of the OPLB learner.
#[derive(Debug, Clone, PartialEq)]
pub struct OplbState {
    /// `lambda I + sum x x^T`.
    pub sigma: DMatrix<f64>,
    /// `lambda I_perp + sum x_perp x_perp^T`; `x0` lies in its null space.
    pub sigma_perp: DMatrix<f64>,
    pub b_r: DVector<f64>,
    /// `sum c_perp x_perp` (projected model) or `sum c x` (full model).
    pub b_c: DVector<f64>,
    pub e0: DVector<f64>,
    pub x0_norm: f64,
    /// `None` when the safe cost is unknown.
    pub c0: Option<f64>,
    pub lambda: f64,
    pub n_obs: u64,
    pub cost_model: CostModel,
    // reflection mapping e0 to the first basis vector
    householder: DMatrix<f64>,
}

impl OplbState {
    /// Empty statistics for a known safe cost.
    pub fn new(x0: &[f64], c0: f64, lambda: f64) -> Result<Self> {
        Self::build(x0, Some(c0), lambda, CostModel::Projected)
    }

    /// Empty statistics with a full-dimensional cost estimator.
    pub fn new_unknown_c0(x0: &[f64], lambda: f64) -> Result<Self> {
        Self::build(x0, None, lambda, CostModel::Full)
    }

    fn build(x0: &[f64], c0: Option<f64>, lambda: f64, cost_model: CostModel) -> Result<Self> {
        let d = x0.len();
        let x0 = DVector::from_column_slice(x0);
        let x0_norm = x0.norm();
        if d == 0 || !(x0_norm > 0.0) {
            return Err(BanditError::InvalidInstance(
                "x0 must be a non-zero vector".into(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(BanditError::Domain(format!("lambda {lambda} must be > 0")));
        }
        let e0 = &x0 / x0_norm;
        let eye = DMatrix::identity(d, d);
        let sigma_perp = (&eye - &e0 * e0.transpose()) * lambda;
        let mut v = e0.clone();
        v[0] -= 1.0;
        let vv = v.norm_squared();
        let householder = if vv < 1e-30 {
            eye.clone()
        } else {
            &eye - (&v * v.transpose()) * (2.0 / vv)
        };
        Ok(OplbState {
            sigma: eye * lambda,
            sigma_perp,
            b_r: DVector::zeros(d),
            b_c: DVector::zeros(d),
            e0,
            x0_norm,
            c0,
            lambda,
            n_obs: 0,
            cost_model,
            householder,
        })
    }

    pub fn dim(&self) -> usize {
        self.e0.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Rank-one update with one observation of action `x`.
    pub fn update(&mut self, x: &[f64], reward: f64, cost: f64) -> Result<()> {
        self.check_dim(x)?;
        let xv = DVector::from_column_slice(x);
        self.sigma += &xv * xv.transpose();
        self.b_r += &xv * reward;
        let along = xv.dot(&self.e0);
        let x_perp = &xv - &self.e0 * along;
        self.sigma_perp += &x_perp * x_perp.transpose();
        match (self.cost_model, self.c0) {
            (CostModel::Projected, Some(c0)) => {
                let c_perp = cost - along * c0 / self.x0_norm;
                self.b_c += &x_perp * c_perp;
            }
            _ => self.b_c += &xv * cost,
        }
        self.n_obs += 1;
        Ok(())
    }

    pub fn sigma_inv(&self) -> DMatrix<f64> {
        spd_inverse(&self.sigma)
    }

    /// Pseudo-inverse of `sigma_perp`: rotate `e0` onto the first axis,
    /// invert the trailing block, rotate back.
    pub fn sigma_perp_pinv(&self) -> DMatrix<f64> {
        let d = self.dim();
        let h = &self.householder;
        let mut out = DMatrix::zeros(d, d);
        if d > 1 {
            let rotated = h * &self.sigma_perp * h;
            let block = rotated.view((1, 1), (d - 1, d - 1)).into_owned();
            let sym = (&block + block.transpose()) * 0.5;
            out.view_mut((1, 1), (d - 1, d - 1))
                .copy_from(&spd_inverse(&sym));
        }
        h * out * h
    }

    pub fn theta_hat(&self) -> DVector<f64> {
        solve_spd(&self.sigma, &self.b_r)
    }

    /// `pinv(sigma_perp) b_c` (projected model) or `sigma^-1 b_c` (full model).
    pub fn mu_hat(&self) -> DVector<f64> {
        match self.cost_model {
            CostModel::Projected => self.sigma_perp_pinv() * &self.b_c,
            CostModel::Full => solve_spd(&self.sigma, &self.b_c),
        }
    }

    /// `||x||_{sigma^-1}`.
    pub fn inv_norm(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        xv.dot(&solve_spd(&self.sigma, &xv)).max(0.0).sqrt()
    }

    /// Overwrites the sufficient statistics so the estimators equal the given
    /// values. `mu_hat` is projected onto the complement of `x0` first in the
    /// projected model.
    pub fn set_estimates(&mut self, theta_hat: &[f64], mu_hat: &[f64]) -> Result<()> {
        self.check_dim(theta_hat)?;
        self.check_dim(mu_hat)?;
        let th = DVector::from_column_slice(theta_hat);
        let mu = DVector::from_column_slice(mu_hat);
        self.b_r = &self.sigma * th;
        self.b_c = match self.cost_model {
            CostModel::Projected => {
                let mu_perp = &mu - &self.e0 * mu.dot(&self.e0);
                &self.sigma_perp * mu_perp
            }
            CostModel::Full => &self.sigma * mu,
        };
        Ok(())
    }

    /// Reflection mapping `e0` to the first basis vector (its own inverse).
    pub fn householder(&self) -> &DMatrix<f64> {
        &self.householder
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    match m.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => m
            .clone()
            .try_inverse()
            .expect("regularized Gram matrix is invertible"),
    }
}

fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match m.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => m
            .clone()
            .lu()
            .solve(b)
            .expect("regularized Gram matrix is invertible"),
    }
}
