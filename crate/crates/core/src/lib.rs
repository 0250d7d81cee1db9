//! Constrained stochastic bandits: the OPB learner for multi-armed bandits
//! with linear cost budgets, the OPLB learner for constrained linear
//! bandits, exact policy LP solvers, lower-bound constructions and a seeded
//! experiment harness.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod instance;
pub mod linalg;
pub mod lower_bound;
pub mod lp;
pub mod opb;
pub mod oplb;
pub mod params;
pub mod policy;
pub mod rng;
pub mod selftest;
pub mod sim;

pub use error::{BanditError, Result};
pub use instance::{draw_reward_cost, LinearBounds, LinearInstance, MabInstance, NoiseKind};
pub use lp::{LpProblem, LpSolution, LpStatus};
pub use params::ConfidenceParams;
pub use policy::{policy_expectation, sample_from_policy, Policy};
