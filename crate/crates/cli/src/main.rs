use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbandit::lower_bound::lower_bound_report;
use cbandit::selftest::run_selftest;
use cbandit::sim::{
    reproduce_figures, run_experiment, write_experiment, Environment, ExperimentConfig,
    FIGURE_HORIZON, FIGURE_REPLICATES, FIGURE_THRESHOLDS,
};
use cbandit::{lp, BanditError, LinearInstance, LpProblem, MabInstance};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cbandit",
    version,
    about = "Constrained stochastic bandits: learners, policy LPs and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run OPB on a multi-armed instance and write runs, summary and config.
    RunOpb {
        #[command(flatten)]
        run: RunArgs,
        /// Clip reward and cost UCBs to [0, 1].
        #[arg(long)]
        clip_ucb: bool,
    },
    /// Run OPLB on a linear instance and write runs, summary and config.
    RunOplb {
        #[command(flatten)]
        run: RunArgs,
        /// Estimate the safe action's cost before learning.
        #[arg(long)]
        unknown_c0: bool,
        /// Ridge regularizer.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Solve a policy LP given as JSON (`-` reads stdin) and print the solution.
    SolveLp { problem: PathBuf },
    /// Build the lower-bound instance pair and print it with its optimal values.
    LowerBound {
        /// Number of arms (at least 4).
        #[arg(long)]
        arms: usize,
        #[arg(long)]
        tau: f64,
        /// Expected cost of the safe arm.
        #[arg(long)]
        safe_cost: f64,
        #[arg(long)]
        horizon: u64,
    },
    /// Run the four-arm benchmark for each threshold and write one directory per threshold.
    ReproduceFigures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Threshold to run; repeat for several. Defaults to 1.0, 0.5 and 0.2.
        #[arg(long = "tau")]
        taus: Vec<f64>,
        #[arg(long, default_value_t = FIGURE_HORIZON)]
        horizon: u64,
        #[arg(long, default_value_t = FIGURE_REPLICATES)]
        replicates: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Run the fast invariant suite.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Instance JSON file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 10)]
    replicates: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    alpha_r: Option<f64>,
    #[arg(long)]
    alpha_c: Option<f64>,
}

impl RunArgs {
    fn config(&self, environment: Environment) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(environment, self.horizon, self.replicates, self.seed);
        cfg.delta = self.delta;
        cfg.alpha_r = self.alpha_r;
        cfg.alpha_c = self.alpha_c;
        cfg
    }
}

enum Failure {
    /// Assertion or learner failure.
    Check(String),
    /// Bad configuration or arguments.
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

impl From<BanditError> for Failure {
    fn from(e: BanditError) -> Self {
        let msg = e.to_string();
        match e {
            BanditError::Io { .. } | BanditError::Csv { .. } => Failure::Io(msg),
            BanditError::Infeasible(_) | BanditError::EstimationTimeout { .. } => {
                Failure::Check(msg)
            }
            _ => Failure::Usage(msg),
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    let mut s = String::new();
    let res = if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut s).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| s = t)
    };
    res.map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(s)
}

fn with_path(path: &Path) -> impl Fn(BanditError) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure::Check(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn run_and_write(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let result = run_experiment(cfg)?;
    let dir = write_experiment(out, cfg, &result)?;
    let t = result.summary.rounds() - 1;
    println!("wrote {}", dir.display());
    println!(
        "final regret: mean {} std {}",
        result.summary.regret.mean[t], result.summary.regret.std[t]
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RunOpb { run, clip_ucb } => {
            let text = read_input(&run.config)?;
            let inst = MabInstance::from_json_str(&text).map_err(with_path(&run.config))?;
            let mut cfg = run.config(Environment::Opb(inst));
            cfg.clip_ucb = clip_ucb;
            run_and_write(&cfg, &run.out)
        }
        Command::RunOplb {
            run,
            unknown_c0,
            lambda,
        } => {
            let text = read_input(&run.config)?;
            let inst = LinearInstance::from_json_str(&text).map_err(with_path(&run.config))?;
            let mut cfg = run.config(Environment::Oplb(inst));
            cfg.unknown_c0 = unknown_c0;
            cfg.lambda = lambda;
            run_and_write(&cfg, &run.out)
        }
        Command::SolveLp { problem } => {
            let text = read_input(&problem)?;
            let parsed: LpProblem = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: json: {e}", problem.display())))?;
            parsed.validate()?;
            print_json(&lp::solve(&parsed)?)
        }
        Command::LowerBound {
            arms,
            tau,
            safe_cost,
            horizon,
        } => print_json(&lower_bound_report(arms, tau, safe_cost, horizon)?),
        Command::ReproduceFigures {
            out,
            seed,
            taus,
            horizon,
            replicates,
            delta,
        } => {
            let taus = if taus.is_empty() {
                FIGURE_THRESHOLDS.to_vec()
            } else {
                taus
            };
            for dir in reproduce_figures(&out, seed, &taus, horizon, replicates, delta)? {
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Selftest => {
            let outcomes = run_selftest();
            for o in &outcomes {
                println!("{o}");
            }
            let failed: Vec<&str> = outcomes
                .iter()
                .filter(|o| !o.passed())
                .map(|o| o.name)
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Check(format!(
                    "selftest failed: {}",
                    failed.join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
