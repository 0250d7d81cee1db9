use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};
use crate::instance::LinearBounds;

/// Radius and scale knobs for the confidence sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub delta: f64,
    pub alpha_r: f64,
    pub alpha_c: f64,
    pub lambda: f64,
    pub r: f64,
    pub s: f64,
    pub l: f64,
}

impl ConfidenceParams {
    pub fn new(
        delta: f64,
        alpha_r: f64,
        alpha_c: f64,
        lambda: f64,
        bounds: LinearBounds,
    ) -> Result<Self> {
        let p = ConfidenceParams {
            delta,
            alpha_r,
            alpha_c,
            lambda,
            r: bounds.r,
            s: bounds.s,
            l: bounds.l,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BanditError::Domain(format!(
                "delta {} not in (0, 1)",
                self.delta
            )));
        }
        if !(self.alpha_r >= 1.0 && self.alpha_c >= 1.0) {
            return Err(BanditError::Domain(format!(
                "alphas must be >= 1, got ({}, {})",
                self.alpha_r, self.alpha_c
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(BanditError::Domain(format!(
                "lambda {} must be > 0",
                self.lambda
            )));
        }
        Ok(())
    }
}
