//! Sparse probability distributions over arms or actions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A distribution over arm (or action) indices, stored as `(index, weight)`
/// pairs with positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    entries: Vec<(usize, f64)>,
}

impl Policy {
    /// Builds a policy, dropping zero-weight entries.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut kept = Vec::with_capacity(entries.len());
        let mut sum = 0.0;
        for (idx, w) in entries {
            if !w.is_finite() || w < 0.0 {
                return Err(BanditError::InvalidPolicy(format!(
                    "weight {w} on index {idx} is not a finite non-negative number"
                )));
            }
            if kept.iter().any(|&(i, _)| i == idx) {
                return Err(BanditError::InvalidPolicy(format!("duplicate index {idx}")));
            }
            sum += w;
            if w > 0.0 {
                kept.push((idx, w));
            }
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(BanditError::InvalidPolicy(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        kept.sort_by_key(|&(i, _)| i);
        Ok(Policy { entries: kept })
    }

    pub fn point_mass(index: usize) -> Self {
        Policy {
            entries: vec![(index, 1.0)],
        }
    }

    /// Dense weights -> sparse policy. Tiny negative round-off is clipped.
    pub fn from_dense(weights: &[f64]) -> Result<Self> {
        let entries = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (i, if w < 0.0 && w > -1e-12 { 0.0 } else { w }))
            .collect();
        Policy::new(entries)
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(i, _)| i == index)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.iter().map(|&(i, _)| i).max()
    }

    /// Checks every index is `< len`.
    pub fn check_len(&self, len: usize) -> Result<()> {
        match self.max_index() {
            Some(i) if i >= len => Err(BanditError::InvalidPolicy(format!(
                "index {i} out of range for {len} arms"
            ))),
            _ => Ok(()),
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }

    /// `E_{a ~ pi}[values[a]]`.
    pub fn expectation(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(self.entries.iter().map(|&(i, w)| w * values[i]).sum())
    }

    /// Expected action `x_pi = E_{x ~ pi}[x]` for a list of vectors.
    pub fn mean_vector(&self, actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_len(actions.len())?;
        let dim = actions.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim];
        for &(i, w) in &self.entries {
            for (o, x) in out.iter_mut().zip(&actions[i]) {
                *o += w * x;
            }
        }
        Ok(out)
    }

    /// Draws an index with probability equal to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.entries.len() == 1 {
            return self.entries[0].0;
        }
        let total: f64 = self.entries.iter().map(|&(_, w)| w).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for &(i, w) in &self.entries {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.entries[self.entries.len() - 1].0
    }
}

/// `sum_a pi_a * values[a]`.
pub fn policy_expectation(policy: &Policy, values: &[f64]) -> Result<f64> {
    policy.expectation(values)
}

pub fn sample_from_policy<R: Rng + ?Sized>(policy: &Policy, rng: &mut R) -> usize {
    policy.sample(rng)
}
