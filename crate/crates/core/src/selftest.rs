//! Fast invariant suite behind the `selftest` command. Each check is also
//! callable on its own with a case count so larger runs can reuse it.

use nalgebra::DVector;
use rand::Rng;

use crate::error::Result;
use crate::instance::LinearBounds;
use crate::lower_bound::{binary_relative_entropy, inverse_prob_gap};
use crate::lp::{self, LpProblem, MixtureFn, LP_TOL};
use crate::oplb::{optimistic_reward, project_safe, reward_ellipsoid, weighted_norm, OplbState};
use crate::params::ConfidenceParams;
use crate::rng::{replicate_rng, ReplicateRng};

pub const SELFTEST_SEED: u64 = 20_240_101;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// First failing case, if any.
    pub failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    fn from_cases(
        name: &'static str,
        cases: usize,
        run: impl FnMut(usize) -> Result<Option<String>>,
    ) -> Self {
        let mut run = run;
        for i in 0..cases {
            let failure = match run(i) {
                Ok(None) => continue,
                Ok(Some(msg)) => msg,
                Err(e) => e.to_string(),
            };
            return CheckOutcome {
                name,
                cases,
                failure: Some(format!("case {i}: {failure}")),
            };
        }
        CheckOutcome {
            name,
            cases,
            failure: None,
        }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.failure {
            None => write!(f, "PASS {} ({} cases)", self.name, self.cases),
            Some(msg) => write!(f, "FAIL {}: {msg}", self.name),
        }
    }
}

/// `K` in `2..=8`, values uniform in `[0, 1]`, `tau` uniform in `[min cost, 1]`.
pub fn random_single_constraint(rng: &mut impl Rng) -> LpProblem {
    let k = rng.random_range(2..=8);
    let objective: Vec<f64> = (0..k).map(|_| rng.random()).collect();
    let costs: Vec<f64> = (0..k).map(|_| rng.random()).collect();
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tau = rng.random_range(lo..=1.0);
    LpProblem::single(objective, costs, tau).expect("well-formed")
}

/// `m` in `{2, 3}`, `K` in `2..=6`; arm 0 meets every threshold.
pub fn random_multi_constraint(rng: &mut impl Rng) -> LpProblem {
    let m = rng.random_range(2..=3);
    let k = rng.random_range(2..=6);
    let objective: Vec<f64> = (0..k).map(|_| rng.random()).collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..k).map(|_| rng.random()).collect())
        .collect();
    let thresholds = rows.iter().map(|r| rng.random_range(r[0]..=1.0)).collect();
    LpProblem::new(objective, rows, thresholds).expect("well-formed")
}

/// Closed form against the simplex: equal values and support at most 2.
pub fn lp_oracle_equivalence(cases: usize, seed: u64, mixture: MixtureFn) -> CheckOutcome {
    let mut rng = replicate_rng(seed, 0);
    CheckOutcome::from_cases("lp_oracle_equivalence", cases, |_| {
        let p = random_single_constraint(&mut rng);
        let closed = lp::solve_single_constraint_with(&p, mixture)?;
        let simplex = lp::solve_multi_constraint(&p)?;
        let support = closed.policy.as_ref().map_or(0, |q| q.support_size());
        Ok(if (closed.value - simplex.value).abs() > LP_TOL {
            Some(format!(
                "closed form {} vs simplex {}",
                closed.value, simplex.value
            ))
        } else if support > 2 {
            Some(format!("support {support}"))
        } else {
            None
        })
    })
}

/// Strong duality at the recovered multiplier and weak duality on a
/// 100-point grid, over the same instances as [`lp_oracle_equivalence`].
pub fn duality_certificate(cases: usize, seed: u64, mixture: MixtureFn) -> CheckOutcome {
    let mut rng = replicate_rng(seed, 0);
    CheckOutcome::from_cases("duality_certificate", cases, |_| {
        let p = random_single_constraint(&mut rng);
        let primal = lp::solve_single_constraint_with(&p, mixture)?.value;
        let Some(lam) = lp::optimal_dual(&p)? else {
            return Ok(Some("no multiplier for a feasible problem".into()));
        };
        let at_opt = lp::dual_value(&p, lam)?;
        if (at_opt - primal).abs() > LP_TOL {
            return Ok(Some(format!("dual {at_opt} at {lam} vs primal {primal}")));
        }
        let top = (2.0 * lam).max(10.0);
        for i in 0..100 {
            let l = top * i as f64 / 99.0;
            let d = lp::dual_value(&p, l)?;
            if d < primal - LP_TOL {
                return Ok(Some(format!(
                    "weak duality: dual {d} at {l} below primal {primal}"
                )));
            }
        }
        Ok(None)
    })
}

/// Simplex on several constraints: support at most `m + 1` and feasible.
pub fn multi_constraint_support(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = replicate_rng(seed, 1);
    CheckOutcome::from_cases("multi_constraint_support", cases, |_| {
        let p = random_multi_constraint(&mut rng);
        let sol = lp::solve(&p)?;
        let Some(pol) = sol.policy else {
            return Ok(Some("infeasible despite a feasible arm".into()));
        };
        let residual = p.feasibility_residual(&pol)?;
        Ok(if pol.support_size() > p.num_constraints() + 1 {
            Some(format!(
                "support {} with {} constraints",
                pol.support_size(),
                p.num_constraints()
            ))
        } else if residual > LP_TOL {
            Some(format!("feasibility residual {residual}"))
        } else {
            None
        })
    })
}

fn random_vec(rng: &mut ReplicateRng, d: usize, half_width: f64) -> Vec<f64> {
    (0..d)
        .map(|_| rng.random_range(-half_width..half_width))
        .collect()
}

/// `||x_perp||^2` under the pseudo-inverse of the orthogonal Gram matrix never
/// exceeds `||x||^2` under the inverse full Gram matrix (`d <= 8`, `t <= 50`).
pub fn inverse_norm_domination(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = replicate_rng(seed, 2);
    CheckOutcome::from_cases("inverse_norm_domination", cases, |_| {
        let d = rng.random_range(1..=8);
        let mut x0 = random_vec(&mut rng, d, 1.0);
        x0[0] += if x0[0] >= 0.0 { 0.1 } else { -0.1 };
        let lambda = rng.random_range(0.5..2.0);
        let mut s = OplbState::new(&x0, 0.1, lambda)?;
        for _ in 0..rng.random_range(0..=50) {
            let x = random_vec(&mut rng, d, 1.0);
            s.update(&x, 0.0, 0.0)?;
        }
        let x = random_vec(&mut rng, d, 1.0);
        let (_, xp) = project_safe(&x, s.e0.as_slice());
        let lhs = weighted_norm(&s.sigma_perp_pinv(), &DVector::from_vec(xp)).powi(2);
        let rhs = s.inv_norm(&x).powi(2);
        Ok((lhs > rhs + 1e-9).then(|| format!("{lhs} > {rhs} (d = {d})")))
    })
}

/// Closed-form optimistic reward against the explicit ellipsoid maximizer.
pub fn optimistic_reward_maximizer(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = replicate_rng(seed, 3);
    let bounds = LinearBounds {
        s: 1.0,
        l: 1.0,
        r: 1.0,
    };
    CheckOutcome::from_cases("optimistic_reward_maximizer", cases, |_| {
        let d = rng.random_range(1..=8);
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut s = OplbState::new(&x0, 0.0, 1.0)?;
        for _ in 0..rng.random_range(0..=50) {
            let x = random_vec(&mut rng, d, 0.4);
            s.update(&x, rng.random(), rng.random())?;
        }
        let p = ConfidenceParams::new(0.1, rng.random_range(1.0..5.0), 1.0, 1.0, bounds)?;
        let x = random_vec(&mut rng, d, 0.4);
        let v = reward_ellipsoid(&s, &p).maximizer(&x);
        let direct = DVector::from_column_slice(&x).dot(&v);
        let closed = optimistic_reward(&s, &x, &p);
        Ok(((closed - direct).abs() > 1e-10)
            .then(|| format!("closed form {closed} vs maximizer {direct}")))
    })
}

/// `kl(x, y) >= (1/2) log(1 / (4y))` for `x >= 1/2` on a full grid.
pub fn binary_entropy_sweep() -> CheckOutcome {
    CheckOutcome::from_cases("binary_entropy_sweep", 101, |i| {
        let x = 0.5 + 0.5 * i as f64 / 100.0;
        for j in 1..1000 {
            let y = j as f64 / 1000.0;
            let d = binary_relative_entropy(x, y)?;
            let bound = 0.5 * (1.0 / (4.0 * y)).ln();
            if d < bound - 1e-12 {
                return Ok(Some(format!("kl({x}, {y}) = {d} < {bound}")));
            }
        }
        Ok(None)
    })
}

/// Inverse-probability gap bounded by `4 |delta|` on a full grid.
pub fn inverse_prob_gap_sweep() -> CheckOutcome {
    CheckOutcome::from_cases("inverse_prob_gap_sweep", 51, |i| {
        let x = i as f64 * 0.01;
        for j in -25..=25 {
            let delta = j as f64 * 0.01;
            let g = inverse_prob_gap(x, delta)?;
            if g > 4.0 * delta.abs() + 1e-15 {
                return Ok(Some(format!("gap({x}, {delta}) = {g}")));
            }
        }
        Ok(None)
    })
}

/// Every check at selftest scale, using `mixture` in the closed-form solver.
pub fn run_selftest_with(mixture: MixtureFn) -> Vec<CheckOutcome> {
    vec![
        lp_oracle_equivalence(100, SELFTEST_SEED, mixture),
        duality_certificate(100, SELFTEST_SEED, mixture),
        multi_constraint_support(100, SELFTEST_SEED),
        inverse_norm_domination(100, SELFTEST_SEED),
        optimistic_reward_maximizer(100, SELFTEST_SEED),
        binary_entropy_sweep(),
        inverse_prob_gap_sweep(),
    ]
}

pub fn run_selftest() -> Vec<CheckOutcome> {
    run_selftest_with(lp::pair_mixture)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped_mixture(uc_i: f64, uc_j: f64, tau: f64) -> Result<(f64, f64)> {
        let (a, b) = lp::pair_mixture(uc_i, uc_j, tau)?;
        Ok((b, a))
    }

    #[test]
    fn clean_build_passes() {
        let out = run_selftest();
        assert!(out.iter().all(CheckOutcome::passed), "{out:?}");
        assert_eq!(out.len(), 7);
    }

    #[test]
    fn sign_flip_is_caught_by_the_duality_check() {
        let out = run_selftest_with(flipped_mixture);
        let dual = out
            .iter()
            .find(|c| c.name == "duality_certificate")
            .unwrap();
        assert!(!dual.passed());
        assert!(dual.to_string().starts_with("FAIL duality_certificate"));
        // checks that do not touch the mixture are unaffected
        assert!(out
            .iter()
            .filter(|c| c.name.contains("sweep"))
            .all(CheckOutcome::passed));
    }
}
