use super::{true_optimal_policy, Environment, ExperimentConfig};
use crate::error::Result;
use crate::instance::{draw_reward_cost, LinearInstance, MabInstance};
use crate::linalg::dot;
use crate::opb::{opb_step, OpbConfig, OpbState};
use crate::oplb::{
    default_alphas_linear, oplb_select_policy, select_policy, unknown_c0_alphas, ExactEvaluator,
    OplbState, SafeCostEstimate, SafeCostStopper,
};
use crate::params::ConfidenceParams;
use crate::policy::Policy;
use crate::rng::{replicate_rng, replicate_seed, ReplicateRng};

/// Sum of exploration widths `||x_s||_{sigma_s^-1}` along a linear run and
/// the elliptical-potential bound it must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationTrace {
    pub width_sum: f64,
    pub bound: f64,
}

/// Per-round trace of one replicate. Round `t` is stored at index `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub replicate_id: u64,
    pub seed: u64,
    pub policy_expected_reward: Vec<f64>,
    /// `[round][constraint]`.
    pub policy_expected_cost: Vec<Vec<f64>>,
    pub cumulative_regret: Vec<f64>,
    pub exploration: Option<ExplorationTrace>,
    pub safe_cost_estimate: Option<SafeCostEstimate>,
}

impl RunRecord {
    fn with_capacity(replicate_id: u64, seed: u64, horizon: usize) -> Self {
        RunRecord {
            replicate_id,
            seed,
            policy_expected_reward: Vec::with_capacity(horizon),
            policy_expected_cost: Vec::with_capacity(horizon),
            cumulative_regret: Vec::with_capacity(horizon),
            exploration: None,
            safe_cost_estimate: None,
        }
    }

    pub fn rounds(&self) -> usize {
        self.cumulative_regret.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.policy_expected_cost.first().map_or(0, Vec::len)
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    fn push(&mut self, optimum: f64, reward: f64, costs: Vec<f64>) {
        let prev = self.final_regret();
        self.cumulative_regret.push(prev + (optimum - reward));
        self.policy_expected_reward.push(reward);
        self.policy_expected_cost.push(costs);
    }
}

/// Runs one seeded replicate; the result depends only on `(config, replicate)`.
pub fn run_episode(config: &ExperimentConfig, replicate: u64) -> Result<RunRecord> {
    let seed = replicate_seed(config.base_seed, replicate);
    let mut rng = replicate_rng(config.base_seed, replicate);
    let mut record = RunRecord::with_capacity(replicate, seed, config.horizon as usize);
    match &config.environment {
        Environment::Opb(inst) => run_opb(config, inst, &mut rng, &mut record)?,
        Environment::Oplb(inst) => run_oplb(config, inst, &mut rng, &mut record)?,
    }
    Ok(record)
}

fn run_opb(
    config: &ExperimentConfig,
    inst: &MabInstance,
    rng: &mut ReplicateRng,
    record: &mut RunRecord,
) -> Result<()> {
    let (_, optimum) = true_optimal_policy(inst)?;
    let mut cfg = OpbConfig::for_instance(
        inst,
        config.delta,
        config.horizon,
        config.alpha_r,
        config.alpha_c,
    )?;
    cfg.clip_ucb = config.clip_ucb;
    let mut state = OpbState::new(inst.num_arms(), inst.num_constraints());
    for _ in 0..config.horizon {
        let policy = opb_step(&state, &cfg)?;
        let reward = policy.expectation(&inst.mean_rewards)?;
        record.push(optimum, reward, inst.policy_costs(&policy)?);
        let arm = policy.sample(rng);
        let (r, c) = draw_reward_cost(inst, arm, rng);
        state.record(arm, r, &c)?;
    }
    Ok(())
}

fn run_oplb(
    config: &ExperimentConfig,
    inst: &LinearInstance,
    rng: &mut ReplicateRng,
    record: &mut RunRecord,
) -> Result<()> {
    let truth = ExactEvaluator {
        theta: inst.theta_star.clone(),
        mu: inst.mu_star.clone(),
    };
    let optima = inst
        .action_sets
        .iter()
        .enumerate()
        .map(|(i, set)| Ok(select_policy(&truth, set, inst.tau, inst.safe_index(i))?.value))
        .collect::<Result<Vec<f64>>>()?;

    let mut state = if config.unknown_c0 {
        OplbState::new_unknown_c0(&inst.x0, config.lambda)?
    } else {
        OplbState::new(&inst.x0, inst.c0, config.lambda)?
    };
    let with_alphas = |alpha_r: f64, alpha_c: f64| {
        ConfidenceParams::new(
            config.delta,
            config.alpha_r.unwrap_or(alpha_r),
            config.alpha_c.unwrap_or(alpha_c),
            config.lambda,
            inst.bounds,
        )
    };
    // `None` while the safe-cost warm start is still running
    let mut params = if config.unknown_c0 {
        None
    } else {
        let (ar, ac) = default_alphas_linear(inst.tau, inst.c0)?;
        Some(with_alphas(ar, ac)?)
    };
    let mut stopper = SafeCostStopper::new(inst.tau, config.horizon);

    let mut width_sum = 0.0;
    for t in 0..config.horizon as usize {
        let actions = inst.action_set(t);
        let safe = inst.safe_index(t);
        let policy = match &params {
            Some(p) => oplb_select_policy(&state, actions, inst.tau, p, safe)?.policy,
            None => Policy::point_mass(safe),
        };
        let x_pi = policy.mean_vector(actions)?;
        let optimum = optima[t % optima.len()];
        record.push(
            optimum,
            dot(&x_pi, &inst.theta_star),
            vec![dot(&x_pi, &inst.mu_star)],
        );

        let x = &actions[policy.sample(rng)];
        width_sum += state.inv_norm(x);
        let (r, c) = inst.draw(x, rng);
        state.update(x, r, c)?;
        if params.is_none() {
            if let Some(est) = stopper.push(c) {
                record.safe_cost_estimate = Some(est);
                let (ar, ac) = unknown_c0_alphas(est.delta_hat);
                params = Some(with_alphas(ar, ac)?);
            }
        }
    }
    let t = config.horizon as f64;
    let d = inst.dim() as f64;
    let l = inst.bounds.l;
    record.exploration = Some(ExplorationTrace {
        width_sum,
        bound: (2.0 * t * d * (1.0 + t * l * l / config.lambda).ln()).sqrt(),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{LinearBounds, NoiseKind};
    use crate::sim::figure_instance;

    fn opb_config(inst: MabInstance, horizon: u64) -> ExperimentConfig {
        ExperimentConfig::new(Environment::Opb(inst), horizon, 1, 42)
    }

    fn linear_instance() -> LinearInstance {
        let actions = vec![
            vec![0.2, 0.0, 0.0],
            vec![0.0, 0.8, 0.1],
            vec![0.3, 0.3, 0.6],
            vec![0.5, 0.5, 0.0],
        ];
        LinearInstance::new(
            vec![0.3, 0.6, 0.5],
            vec![0.5, 0.7, 0.2],
            vec![actions],
            vec![0.2, 0.0, 0.0],
            0.35,
            LinearBounds {
                s: 1.0,
                l: 1.0,
                r: 0.1,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_safe_arm_has_zero_regret() {
        let inst = MabInstance::new(
            vec![0.4],
            vec![vec![0.1]],
            vec![0.5],
            0,
            NoiseKind::Bernoulli,
            NoiseKind::Bernoulli,
        )
        .unwrap();
        let r = run_episode(&opb_config(inst, 200), 0).unwrap();
        assert!(r.cumulative_regret.iter().all(|&v| v == 0.0));
        assert_eq!(r.rounds(), 200);
    }

    #[test]
    fn rerun_is_bit_identical() {
        let cfg = opb_config(figure_instance(0.5).unwrap(), 300);
        assert_eq!(run_episode(&cfg, 3).unwrap(), run_episode(&cfg, 3).unwrap());
        assert_ne!(run_episode(&cfg, 3).unwrap(), run_episode(&cfg, 4).unwrap());
        let lin = ExperimentConfig::new(Environment::Oplb(linear_instance()), 200, 1, 9);
        assert_eq!(run_episode(&lin, 0).unwrap(), run_episode(&lin, 0).unwrap());
    }

    #[test]
    fn opb_regret_is_non_decreasing_and_safe() {
        let inst = figure_instance(0.2).unwrap();
        let r = run_episode(&opb_config(inst, 2000), 1).unwrap();
        assert!(r.cumulative_regret.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(r.policy_expected_cost.iter().all(|c| c[0] <= 0.2 + 1e-9));
    }

    #[test]
    fn oplb_run_respects_the_elliptical_potential() {
        let cfg = ExperimentConfig::new(Environment::Oplb(linear_instance()), 1500, 1, 5);
        let r = run_episode(&cfg, 0).unwrap();
        let e = r.exploration.unwrap();
        assert!(e.width_sum <= e.bound, "{} > {}", e.width_sum, e.bound);
        assert!(r.cumulative_regret.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn unknown_safe_cost_warm_start() {
        let mut cfg = ExperimentConfig::new(Environment::Oplb(linear_instance()), 8000, 1, 5);
        cfg.unknown_c0 = true;
        let r = run_episode(&cfg, 0).unwrap();
        let est = r.safe_cost_estimate.expect("rule fires within the horizon");
        // x0 is played throughout the warm start
        let x0_cost = 0.2 * 0.5;
        let warm = est.rounds as usize;
        assert!(r.policy_expected_cost[..warm]
            .iter()
            .all(|c| (c[0] - x0_cost).abs() < 1e-15));
        assert!(r.exploration.unwrap().width_sum <= r.exploration.unwrap().bound);
    }
}
