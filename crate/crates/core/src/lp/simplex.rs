//! Dense two-phase simplex with Bland's rule over `pi in simplex`.

use super::{LpProblem, LpSolution, LpStatus, LP_TOL};
use crate::error::{BanditError, Result};
use crate::policy::Policy;

const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, PartialEq)]
enum ColKind {
    Decision,
    Slack,
    Artificial,
}

struct Tableau {
    // rows x (cols + 1); the last column is the right-hand side
    rows: Vec<Vec<f64>>,
    // reduced costs `z_j - c_j` for a maximization, last entry is the objective value
    obj: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Installs `max sum_j cost[j] x_j` as the objective row, priced out
    /// against the current basis.
    fn set_objective(&mut self, cost: &[f64]) {
        let n = self.ncols();
        self.obj = cost
            .iter()
            .map(|c| -c)
            .chain(std::iter::once(0.0))
            .collect();
        for r in 0..self.rows.len() {
            let b = self.basis[r];
            let f = self.obj[b];
            if f != 0.0 {
                for j in 0..=n {
                    self.obj[j] -= f * self.rows[r][j];
                }
            }
        }
    }

    /// Bland's rule: lowest-index improving column, ratio ties to the lowest
    /// basic variable index.
    fn optimize(&mut self, allowed: impl Fn(ColKind) -> bool) -> Result<()> {
        let n = self.ncols();
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..n).find(|&j| allowed(self.kinds[j]) && self.obj[j] < -PIVOT_TOL)
            else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = row[n] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr || (ratio == lr && self.basis[i] < self.basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(BanditError::InvalidProblem(
                    "simplex reported an unbounded LP".into(),
                ));
            };
            self.pivot(r, enter);
        }
        Err(BanditError::InvalidProblem(format!(
            "simplex exceeded {MAX_PIVOTS} pivots"
        )))
    }
}

/// Two-phase simplex over the policy simplex with `m` budget rows.
///
/// Returns a vertex solution, so the policy support is at most `m + 1`.
/// Dual multipliers are read off the slack columns of the final tableau.
pub fn solve_multi_constraint(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let k = problem.num_arms();
    let m = problem.num_constraints();

    // Columns: k decision variables, one slack per budget row, then artificials.
    let mut kinds = vec![ColKind::Decision; k];
    kinds.extend(std::iter::repeat_n(ColKind::Slack, m));
    let slack_col = |i: usize| k + i;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut needs_artificial = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = problem.constraint_rows[i].clone();
        row.extend(std::iter::repeat_n(0.0, m));
        row[slack_col(i)] = 1.0;
        let mut rhs = problem.thresholds[i];
        if rhs < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
            needs_artificial.push(true);
        } else {
            needs_artificial.push(false);
        }
        row.push(rhs);
        rows.push(row);
    }
    let mut simplex_row = vec![1.0; k];
    simplex_row.extend(std::iter::repeat_n(0.0, m));
    simplex_row.push(1.0);
    rows.push(simplex_row);
    needs_artificial.push(true);

    let mut basis = vec![0; m + 1];
    let n_art = needs_artificial.iter().filter(|&&b| b).count();
    let total = k + m + n_art;
    let mut next_art = k + m;
    for (i, row) in rows.iter_mut().enumerate() {
        let rhs = row.pop().expect("rhs");
        row.resize(total, 0.0);
        if needs_artificial[i] {
            row[next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack_col(i);
        }
        row.push(rhs);
    }
    kinds.extend(std::iter::repeat_n(ColKind::Artificial, n_art));

    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        kinds,
    };

    // Phase 1: maximize -(sum of artificials).
    let phase1: Vec<f64> = tab
        .kinds
        .iter()
        .map(|&kd| if kd == ColKind::Artificial { -1.0 } else { 0.0 })
        .collect();
    tab.set_objective(&phase1);
    tab.optimize(|_| true)?;
    let n = tab.ncols();
    let infeasibility = -tab.obj[n];
    if infeasibility > LP_TOL {
        return Ok(LpSolution::infeasible());
    }

    // Drive zero-level artificials out of the basis where possible.
    for r in 0..tab.rows.len() {
        if tab.kinds[tab.basis[r]] != ColKind::Artificial {
            continue;
        }
        if let Some(c) = (0..n)
            .find(|&j| tab.kinds[j] != ColKind::Artificial && tab.rows[r][j].abs() > PIVOT_TOL)
        {
            tab.pivot(r, c);
        }
    }

    // Phase 2: the real objective, artificials barred from entering.
    let mut phase2 = problem.objective.clone();
    phase2.resize(n, 0.0);
    tab.set_objective(&phase2);
    tab.optimize(|kd| kd != ColKind::Artificial)?;

    let mut x = vec![0.0; k];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < k {
            x[b] = tab.rows[r][n];
        }
    }
    let sum: f64 = x.iter().map(|v| v.max(0.0)).sum();
    let dense: Vec<f64> = x.iter().map(|v| v.max(0.0) / sum).collect();
    let policy = Policy::from_dense(&dense)?;
    let value = problem.value_of(&policy)?;
    // Reduced cost of slack i equals the multiplier of budget row i (also
    // for sign-flipped rows, where the slack enters with coefficient -1).
    let dual = (0..m).map(|i| tab.obj[slack_col(i)].max(0.0)).collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        policy: Some(policy),
        value,
        dual: Some(dual),
    })
}
