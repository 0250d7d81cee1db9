//! Seeded experiment harness: episodes, pseudo-regret, aggregation and CSV
//! output.

mod episode;
mod output;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BanditError, Result};
use crate::instance::{LinearInstance, MabInstance};
use crate::lp::{self, LpProblem};
use crate::policy::Policy;

pub use episode::{run_episode, ExplorationTrace, RunRecord};
pub use output::{
    experiment_dir, read_runs_csv, runs_header, summary_header, write_experiment, write_runs_csv,
    write_summary_csv,
};

/// Environment plus the learner that runs on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "algorithm", content = "instance", rename_all = "snake_case")]
pub enum Environment {
    Opb(MabInstance),
    Oplb(LinearInstance),
}

impl Environment {
    pub fn algorithm_name(&self) -> &'static str {
        match self {
            Environment::Opb(_) => "opb",
            Environment::Oplb(_) => "oplb",
        }
    }

    pub fn thresholds(&self) -> Vec<f64> {
        match self {
            Environment::Opb(inst) => inst.thresholds.clone(),
            Environment::Oplb(inst) => vec![inst.tau],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub environment: Environment,
    pub horizon: u64,
    pub replicates: u64,
    pub base_seed: u64,
    pub delta: f64,
    pub alpha_r: Option<f64>,
    pub alpha_c: Option<f64>,
    /// Ridge parameter of the linear learner.
    pub lambda: f64,
    /// Linear learner only: estimate the safe cost before learning.
    pub unknown_c0: bool,
    pub clip_ucb: bool,
}

impl ExperimentConfig {
    /// Defaults: `delta = 0.1`, `lambda = 1`, default alphas.
    pub fn new(environment: Environment, horizon: u64, replicates: u64, base_seed: u64) -> Self {
        ExperimentConfig {
            environment,
            horizon,
            replicates,
            base_seed,
            delta: 0.1,
            alpha_r: None,
            alpha_c: None,
            lambda: 1.0,
            unknown_c0: false,
            clip_ucb: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.replicates == 0 {
            return Err(BanditError::Domain(format!(
                "horizon and replicates must be >= 1, got {} and {}",
                self.horizon, self.replicates
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BanditError::Domain(format!(
                "delta {} not in (0, 1)",
                self.delta
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(BanditError::Domain(format!(
                "lambda {} must be > 0",
                self.lambda
            )));
        }
        for a in [self.alpha_r, self.alpha_c].into_iter().flatten() {
            if !(a >= 1.0) {
                return Err(BanditError::Domain(format!("alpha {a} must be >= 1")));
            }
        }
        match &self.environment {
            Environment::Opb(inst) => inst.validate(true),
            Environment::Oplb(inst) => inst.validate(),
        }
    }
}

/// Optimal policy of the LP on true means; the regret baseline.
pub fn true_optimal_policy(instance: &MabInstance) -> Result<(Policy, f64)> {
    let problem = LpProblem::new(
        instance.mean_rewards.clone(),
        instance.mean_costs.clone(),
        instance.thresholds.clone(),
    )?;
    let sol = lp::solve(&problem)?;
    match sol.policy {
        Some(p) => Ok((p, sol.value)),
        None => Err(BanditError::Infeasible(
            "true-mean LP has no feasible policy".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    /// Population standard deviation across replicates.
    pub std: Vec<f64>,
}

impl SeriesStats {
    fn from_columns(rows: &[&[f64]]) -> Self {
        let n = rows.len() as f64;
        let len = rows[0].len();
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for t in 0..len {
            let m = rows.iter().map(|r| r[t]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[t] - m) * (r[t] - m)).sum::<f64>() / n;
            mean[t] = m;
            std[t] = var.sqrt();
        }
        SeriesStats { mean, std }
    }
}

/// Per-round mean and spread across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub replicates: usize,
    pub reward: SeriesStats,
    /// One entry per constraint.
    pub cost: Vec<SeriesStats>,
    pub regret: SeriesStats,
}

impl Summary {
    pub fn rounds(&self) -> usize {
        self.regret.mean.len()
    }
}

pub fn aggregate(records: &[RunRecord]) -> Result<Summary> {
    let first = records
        .first()
        .ok_or_else(|| BanditError::LengthMismatch("no records to aggregate".into()))?;
    let t = first.rounds();
    let m = first.num_constraints();
    for r in records {
        if r.rounds() != t || r.num_constraints() != m {
            return Err(BanditError::LengthMismatch(format!(
                "replicate {} has {} rounds and {} constraints, expected {t} and {m}",
                r.replicate_id,
                r.rounds(),
                r.num_constraints()
            )));
        }
    }
    let rewards: Vec<&[f64]> = records
        .iter()
        .map(|r| r.policy_expected_reward.as_slice())
        .collect();
    let regrets: Vec<&[f64]> = records
        .iter()
        .map(|r| r.cumulative_regret.as_slice())
        .collect();
    let cost = (0..m)
        .map(|i| {
            let cols: Vec<Vec<f64>> = records
                .iter()
                .map(|r| r.policy_expected_cost.iter().map(|c| c[i]).collect())
                .collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            SeriesStats::from_columns(&refs)
        })
        .collect();
    Ok(Summary {
        replicates: records.len(),
        reward: SeriesStats::from_columns(&rewards),
        cost,
        regret: SeriesStats::from_columns(&regrets),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

/// Worker pool sized by `CB_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CB_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            BanditError::Domain(format!("CB_THREADS must be a positive integer, got {v:?}"))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| BanditError::Domain(format!("thread pool: {e}")))
}

/// Runs every replicate in parallel; records come back ordered by replicate.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = thread_pool()?;
    let records = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_episode(config, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = aggregate(&records)?;
    Ok(ExperimentResult { records, summary })
}

/// Fraction of `(replicate, round)` cells whose expected cost exceeds some
/// threshold by more than `tol`.
pub fn constraint_violation_fraction(records: &[RunRecord], thresholds: &[f64], tol: f64) -> f64 {
    let mut cells = 0usize;
    let mut bad = 0usize;
    for r in records {
        for costs in &r.policy_expected_cost {
            cells += 1;
            if costs.iter().zip(thresholds).any(|(c, t)| *c > t + tol) {
                bad += 1;
            }
        }
    }
    if cells == 0 {
        0.0
    } else {
        bad as f64 / cells as f64
    }
}

/// Cumulative mean of a series.
pub fn running_average(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            acc / (i + 1) as f64
        })
        .collect()
}

/// The four-arm Bernoulli benchmark used for the regret, cost and reward
/// figures.
pub fn figure_instance(tau: f64) -> Result<MabInstance> {
    MabInstance::bernoulli(vec![0.1, 0.2, 0.4, 0.7], vec![0.0, 0.4, 0.5, 0.2], tau, 0)
}

pub const FIGURE_THRESHOLDS: [f64; 3] = [1.0, 0.5, 0.2];
pub const FIGURE_HORIZON: u64 = 10_000;
pub const FIGURE_REPLICATES: u64 = 10;

/// Runs the benchmark for each threshold and writes one experiment
/// directory per threshold under `out`.
pub fn reproduce_figures(
    out: &std::path::Path,
    base_seed: u64,
    thresholds: &[f64],
    horizon: u64,
    replicates: u64,
    delta: f64,
) -> Result<Vec<std::path::PathBuf>> {
    thresholds
        .iter()
        .map(|&tau| {
            let mut cfg = ExperimentConfig::new(
                Environment::Opb(figure_instance(tau)?),
                horizon,
                replicates,
                base_seed,
            );
            cfg.delta = delta;
            let result = run_experiment(&cfg)?;
            write_experiment(out, &cfg, &result)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_seed;
    use approx::assert_abs_diff_eq;

    fn record(id: u64, regret: Vec<f64>) -> RunRecord {
        let t = regret.len();
        RunRecord {
            replicate_id: id,
            seed: replicate_seed(0, id),
            policy_expected_reward: vec![0.5; t],
            policy_expected_cost: vec![vec![0.1]; t],
            cumulative_regret: regret,
            exploration: None,
            safe_cost_estimate: None,
        }
    }

    #[test]
    fn true_optimum_examples() {
        let (p, v) = true_optimal_policy(&figure_instance(1.0).unwrap()).unwrap();
        assert_eq!(p, Policy::point_mass(3));
        assert_abs_diff_eq!(v, 0.7);
        let inst = figure_instance(0.2).unwrap();
        let (p, v) = true_optimal_policy(&inst).unwrap();
        assert_eq!(p, Policy::point_mass(3));
        assert_abs_diff_eq!(v, 0.7);
        assert_abs_diff_eq!(inst.policy_costs(&p).unwrap()[0], 0.2);
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[record(0, vec![1.0, 2.0])]).unwrap();
        assert_eq!(one.regret.mean, vec![1.0, 2.0]);
        assert_eq!(one.regret.std, vec![0.0, 0.0]);

        let two = aggregate(&[record(0, vec![1.0, 2.0]), record(1, vec![1.0, 2.0])]).unwrap();
        assert_eq!(two.regret.std, vec![0.0, 0.0]);

        let t = 50;
        let a: Vec<f64> = (0..t).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..t).map(|i| 2.0 * i as f64).collect();
        let s = aggregate(&[record(0, a), record(1, b)]).unwrap();
        assert_abs_diff_eq!(s.regret.mean[t - 1] - s.regret.mean[t - 2], 1.5);
        // population std of {i, 2i} is i / 2
        assert_abs_diff_eq!(s.regret.std[10], 5.0);

        assert!(aggregate(&[]).is_err());
        assert!(matches!(
            aggregate(&[record(0, vec![1.0]), record(1, vec![1.0, 2.0])]),
            Err(BanditError::LengthMismatch(_))
        ));
    }

    #[test]
    fn violation_fraction_counts_cells() {
        let mut r = record(0, vec![0.0; 4]);
        r.policy_expected_cost[1] = vec![0.6];
        assert_abs_diff_eq!(constraint_violation_fraction(&[r], &[0.5], 1e-9), 0.25);
    }

    #[test]
    fn running_average_example() {
        assert_eq!(running_average(&[1.0, 3.0, 2.0]), vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn config_validation() {
        let env = Environment::Opb(figure_instance(0.5).unwrap());
        let mut cfg = ExperimentConfig::new(env, 10, 1, 0);
        assert!(cfg.validate().is_ok());
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
        cfg.horizon = 10;
        cfg.alpha_r = Some(0.5);
        assert!(cfg.validate().is_err());
    }
}
