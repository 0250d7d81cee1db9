use super::LpProblem;

/// Best feasible value over the simplex grid with spacing `1 / grid_n`;
/// `-inf` if no grid point is feasible. Intended for small `K` only.
pub fn brute_force_oracle(problem: &LpProblem, grid_n: usize) -> f64 {
    let k = problem.num_arms();
    if k == 0 || grid_n == 0 {
        return f64::NEG_INFINITY;
    }
    let mut counts = vec![0usize; k];
    let mut best = f64::NEG_INFINITY;
    walk(problem, grid_n, 0, grid_n, &mut counts, &mut best);
    best
}

fn walk(p: &LpProblem, n: usize, arm: usize, left: usize, counts: &mut [usize], best: &mut f64) {
    let k = counts.len();
    if arm == k - 1 {
        counts[arm] = left;
        let w = |a: usize| counts[a] as f64 / n as f64;
        let feasible = p
            .constraint_rows
            .iter()
            .zip(&p.thresholds)
            .all(|(row, &tau)| (0..k).map(|a| w(a) * row[a]).sum::<f64>() <= tau + 1e-12);
        if feasible {
            let v: f64 = (0..k).map(|a| w(a) * p.objective[a]).sum();
            if v > *best {
                *best = v;
            }
        }
        return;
    }
    for c in 0..=left {
        counts[arm] = c;
        walk(p, n, arm + 1, left - c, counts, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_on_grid_optimum() {
        let p = LpProblem::single(vec![0.5, 4.0, 0.0, 2.0], vec![0.3, 0.9, 0.3, 0.9], 0.5).unwrap();
        // optimum (2/3, 1/3) lies on the grid when 3 | n
        assert_abs_diff_eq!(brute_force_oracle(&p, 30), 5.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn experiment_instance_half_threshold() {
        let p = LpProblem::single(vec![0.1, 0.2, 0.4, 0.7], vec![0.0, 0.4, 0.5, 0.2], 0.5).unwrap();
        let v = brute_force_oracle(&p, 100);
        assert!((v - 0.7).abs() <= 0.01, "{v}");
    }

    #[test]
    fn infeasible_is_negative_infinity() {
        let p = LpProblem::single(vec![1.0, 1.0], vec![0.8, 0.9], 0.5).unwrap();
        assert_eq!(brute_force_oracle(&p, 10), f64::NEG_INFINITY);
    }
}
