//! Policy linear programs over the probability simplex:
//!
//! ```text
//! maximize   sum_a pi_a * objective[a]
//! subject to sum_a pi_a * constraint_rows[i][a] <= thresholds[i]   for every i
//!            pi in the simplex
//! ```
//!
//! A single constraint is solved in closed form by enumerating singletons
//! and cost-straddling pairs; the optimum always has support at most 2.
//! Any number of constraints goes through a dense two-phase simplex whose
//! vertex solutions have support at most `m + 1`.

mod oracle;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};
use crate::policy::Policy;

pub use oracle::brute_force_oracle;
pub use simplex::solve_multi_constraint;

/// Feasibility and duality tolerance.
pub const LP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraint_rows: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub policy: Option<Policy>,
    /// `-inf` when infeasible.
    #[serde(with = "value_serde")]
    pub value: f64,
    /// One multiplier per constraint, when available.
    pub dual: Option<Vec<f64>>,
}

impl LpSolution {
    pub fn infeasible() -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            policy: None,
            value: f64::NEG_INFINITY,
            dual: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

// JSON has no infinities; an infeasible value is written as null.
mod value_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

impl LpProblem {
    pub fn new(
        objective: Vec<f64>,
        constraint_rows: Vec<Vec<f64>>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        let p = LpProblem {
            objective,
            constraint_rows,
            thresholds,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn single(objective: Vec<f64>, costs: Vec<f64>, tau: f64) -> Result<Self> {
        Self::new(objective, vec![costs], vec![tau])
    }

    pub fn num_arms(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.thresholds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_arms();
        let m = self.num_constraints();
        let bad = |msg: String| Err(BanditError::InvalidProblem(msg));
        if k == 0 || m == 0 {
            return bad(format!("need K >= 1 and m >= 1, got K = {k}, m = {m}"));
        }
        if self.constraint_rows.len() != m {
            return bad(format!(
                "{} constraint rows for {m} thresholds",
                self.constraint_rows.len()
            ));
        }
        if self.constraint_rows.iter().any(|r| r.len() != k) {
            return bad(format!("every constraint row needs {k} entries"));
        }
        let all = self
            .objective
            .iter()
            .chain(self.constraint_rows.iter().flatten())
            .chain(&self.thresholds);
        if all.clone().any(|v| !v.is_finite()) {
            return bad("all entries must be finite".into());
        }
        Ok(())
    }

    /// `max_i (sum_a pi_a c_ia - tau_i)`; non-positive for feasible policies.
    pub fn feasibility_residual(&self, policy: &Policy) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for (row, &tau) in self.constraint_rows.iter().zip(&self.thresholds) {
            worst = worst.max(policy.expectation(row)? - tau);
        }
        Ok(worst)
    }

    pub fn value_of(&self, policy: &Policy) -> Result<f64> {
        policy.expectation(&self.objective)
    }

    fn require_single(&self) -> Result<()> {
        self.validate()?;
        if self.num_constraints() != 1 {
            return Err(BanditError::InvalidProblem(format!(
                "expected one constraint, got {}",
                self.num_constraints()
            )));
        }
        Ok(())
    }
}

/// Weights `(w_i, w_j)` of the two-arm mixture whose cost is exactly `tau`,
/// for `uc_i <= tau <= uc_j`.
pub fn pair_mixture(uc_i: f64, uc_j: f64, tau: f64) -> Result<(f64, f64)> {
    if uc_i == uc_j {
        return Err(BanditError::DegeneratePair(uc_i));
    }
    if !(uc_i <= tau && tau <= uc_j) {
        return Err(BanditError::InfeasiblePair {
            low: uc_i,
            high: uc_j,
            tau,
        });
    }
    let gap = uc_j - uc_i;
    Ok(((uc_j - tau) / gap, (tau - uc_i) / gap))
}

struct Candidate {
    value: f64,
    policy: Policy,
}

impl Candidate {
    // Larger value wins; an exact value tie goes to the larger support.
    // Candidates arrive in lexicographic index order, so remaining ties keep
    // the lowest indices.
    fn beats(&self, other: &Candidate) -> bool {
        self.value > other.value
            || (self.value == other.value
                && self.policy.support_size() > other.policy.support_size())
    }
}

/// Signature of [`pair_mixture`].
pub type MixtureFn = fn(f64, f64, f64) -> Result<(f64, f64)>;

/// Closed-form solver for one constraint: enumerates every feasible
/// singleton and every pair whose costs straddle the threshold.
pub fn solve_single_constraint(problem: &LpProblem) -> Result<LpSolution> {
    solve_single_constraint_with(problem, pair_mixture)
}

/// [`solve_single_constraint`] with a replaceable pair-mixture rule.
pub fn solve_single_constraint_with(problem: &LpProblem, mixture: MixtureFn) -> Result<LpSolution> {
    problem.require_single()?;
    let ur = &problem.objective;
    let uc = &problem.constraint_rows[0];
    let tau = problem.thresholds[0];
    let k = ur.len();

    let mut best: Option<Candidate> = None;
    let mut offer = |cand: Candidate| {
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    };

    for i in 0..k {
        for j in i..k {
            if i == j {
                if uc[i] <= tau {
                    offer(Candidate {
                        value: ur[i],
                        policy: Policy::point_mass(i),
                    });
                }
                continue;
            }
            let (lo, hi) = if uc[i] <= uc[j] { (i, j) } else { (j, i) };
            if uc[lo] == uc[hi] || !(uc[lo] <= tau && tau <= uc[hi]) {
                continue;
            }
            let (w_lo, w_hi) = mixture(uc[lo], uc[hi], tau)?;
            let policy = Policy::new(vec![(lo, w_lo), (hi, w_hi)])?;
            let value = w_lo * ur[lo] + w_hi * ur[hi];
            offer(Candidate { value, policy });
        }
    }

    match best {
        None => Ok(LpSolution::infeasible()),
        Some(c) => {
            let lam = optimal_dual(problem)?;
            Ok(LpSolution {
                status: LpStatus::Optimal,
                policy: Some(c.policy),
                value: c.value,
                dual: lam.map(|l| vec![l]),
            })
        }
    }
}

/// Lagrangian dual `max_a lam * (tau - uc_a) + ur_a` of a single-constraint problem.
pub fn dual_value(problem: &LpProblem, lam: f64) -> Result<f64> {
    problem.require_single()?;
    if !(lam >= 0.0) {
        return Err(BanditError::Domain(format!(
            "dual variable {lam} must be >= 0"
        )));
    }
    Ok(dual_unchecked(problem, lam))
}

fn dual_unchecked(problem: &LpProblem, lam: f64) -> f64 {
    let tau = problem.thresholds[0];
    problem
        .objective
        .iter()
        .zip(&problem.constraint_rows[0])
        .map(|(r, c)| lam * (tau - c) + r)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Minimizer of the single-constraint dual, or `None` when the primal is
/// infeasible (the dual is then unbounded below).
///
/// The dual is a convex piecewise-linear function of `lam`, so its minimum
/// sits at `0` or at an intersection of two of its lines.
pub fn optimal_dual(problem: &LpProblem) -> Result<Option<f64>> {
    problem.require_single()?;
    let ur = &problem.objective;
    let uc = &problem.constraint_rows[0];
    let tau = problem.thresholds[0];
    if uc.iter().all(|&c| c > tau) {
        return Ok(None);
    }
    let mut best_lam = 0.0;
    let mut best_val = dual_unchecked(problem, 0.0);
    for i in 0..ur.len() {
        for j in (i + 1)..ur.len() {
            if uc[i] == uc[j] {
                continue;
            }
            let lam = (ur[j] - ur[i]) / (uc[j] - uc[i]);
            if !(lam > 0.0) || !lam.is_finite() {
                continue;
            }
            let v = dual_unchecked(problem, lam);
            if v < best_val || (v == best_val && lam < best_lam) {
                best_val = v;
                best_lam = lam;
            }
        }
    }
    Ok(Some(best_lam))
}

/// Closed form for one constraint, simplex otherwise.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    if problem.num_constraints() == 1 {
        solve_single_constraint(problem)
    } else {
        solve_multi_constraint(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Independent 2x2 solve of w_i + w_j = 1, w_i c_i + w_j c_j = tau by Cramer's rule.
    fn cramer(ci: f64, cj: f64, tau: f64) -> (f64, f64) {
        let det = 1.0 * cj - 1.0 * ci;
        ((1.0 * cj - tau * 1.0) / det, (1.0 * tau - ci * 1.0) / det)
    }

    #[test]
    fn pair_mixture_examples() {
        let (a, b) = pair_mixture(0.1, 0.9, 0.5).unwrap();
        let (ea, eb) = cramer(0.1, 0.9, 0.5);
        assert_abs_diff_eq!(a, ea, epsilon = 1e-15);
        assert_abs_diff_eq!(b, eb, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);

        assert_eq!(pair_mixture(0.3, 0.8, 0.3).unwrap(), (1.0, 0.0));

        let (a, b) = pair_mixture(0.2, 0.6, 0.5).unwrap();
        let (ea, eb) = cramer(0.2, 0.6, 0.5);
        assert_abs_diff_eq!(a, ea, epsilon = 1e-15);
        assert_abs_diff_eq!(b, eb, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(a * 0.2 + b * 0.6, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn pair_mixture_errors() {
        assert!(matches!(
            pair_mixture(0.4, 0.4, 0.4),
            Err(BanditError::DegeneratePair(_))
        ));
        assert!(matches!(
            pair_mixture(0.4, 0.6, 0.7),
            Err(BanditError::InfeasiblePair { .. })
        ));
        assert!(matches!(
            pair_mixture(0.4, 0.6, 0.1),
            Err(BanditError::InfeasiblePair { .. })
        ));
    }

    #[test]
    fn experiment_instance_tight_threshold() {
        let p = LpProblem::single(vec![0.1, 0.2, 0.4, 0.7], vec![0.0, 0.4, 0.5, 0.2], 0.2).unwrap();
        let s = solve_single_constraint(&p).unwrap();
        assert_eq!(s.policy.unwrap(), Policy::point_mass(3));
        assert_abs_diff_eq!(s.value, 0.7);
        let simplex = solve_multi_constraint(&p).unwrap();
        assert_abs_diff_eq!(simplex.value, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn slack_constraint_picks_argmax() {
        let p = LpProblem::single(vec![0.3, 0.9, 0.5], vec![0.1, 0.2, 0.3], 0.5).unwrap();
        let s = solve_single_constraint(&p).unwrap();
        assert_eq!(s.policy.unwrap(), Policy::point_mass(1));
        assert_eq!(s.dual, Some(vec![0.0]));
    }

    #[test]
    fn lower_bound_instance_mixture() {
        let p = LpProblem::single(vec![0.5, 4.0, 0.0, 2.0], vec![0.3, 0.9, 0.3, 0.9], 0.5).unwrap();
        let s = solve_single_constraint(&p).unwrap();
        let pol = s.policy.unwrap();
        assert_abs_diff_eq!(pol.weight(0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pol.weight(1), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.value, 5.0 / 3.0, epsilon = 1e-12);
        // lam* = (4 - 0.5) / (0.9 - 0.3)
        let lam = s.dual.unwrap()[0];
        assert_abs_diff_eq!(lam, 3.5 / 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(dual_value(&p, lam).unwrap(), s.value, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_is_a_status() {
        let p = LpProblem::single(vec![0.3, 0.9], vec![0.6, 0.7], 0.5).unwrap();
        let s = solve_single_constraint(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.policy.is_none());
        assert_eq!(s.value, f64::NEG_INFINITY);
        assert_eq!(optimal_dual(&p).unwrap(), None);
    }

    #[test]
    fn dual_at_zero_is_max_reward() {
        let p = LpProblem::single(vec![0.3, 0.9, 0.5], vec![0.1, 0.8, 0.3], 0.5).unwrap();
        assert_abs_diff_eq!(dual_value(&p, 0.0).unwrap(), 0.9);
        assert!(matches!(dual_value(&p, -0.1), Err(BanditError::Domain(_))));
    }

    #[test]
    fn ties_prefer_mixtures_then_low_indices() {
        // every arm has the same objective; the first straddling pair wins
        let p = LpProblem::single(vec![1.0; 4], vec![0.0, 1.0, 1.0, 1.0], 0.3).unwrap();
        let pol = solve_single_constraint(&p).unwrap().policy.unwrap();
        assert_abs_diff_eq!(pol.weight(0), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(pol.weight(1), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(LpProblem::new(vec![], vec![vec![]], vec![0.5]).is_err());
        assert!(LpProblem::new(vec![1.0], vec![vec![0.1, 0.2]], vec![0.5]).is_err());
        assert!(LpProblem::new(vec![f64::NAN], vec![vec![0.1]], vec![0.5]).is_err());
        let two = LpProblem::new(vec![1.0], vec![vec![0.1], vec![0.2]], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            solve_single_constraint(&two),
            Err(BanditError::InvalidProblem(_))
        ));
    }

    #[test]
    fn solution_json_round_trip() {
        let p = LpProblem::single(vec![0.5, 4.0], vec![0.3, 0.9], 0.5).unwrap();
        let s = solve(&p).unwrap();
        let back: LpSolution = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let inf = LpSolution::infeasible();
        let json = serde_json::to_string(&inf).unwrap();
        assert!(json.contains("\"value\":null"), "{json}");
        let back: LpSolution = serde_json::from_str(&json).unwrap();
        assert_eq!(back.value, f64::NEG_INFINITY);
    }
}
