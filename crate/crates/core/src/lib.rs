//! Simulation and policy optimization for active sequential data release
//! against a Bayesian hypothesis-testing adversary.
//!
//! A user releases one observation per step through one of several channels.
//! The adversary tracks a joint belief over a secret and a useful hypothesis;
//! the user wants the useful one revealed while the adversary's confidence on
//! the secret stays below a threshold. Release stops at the first step where
//! that threshold is reached.

// `!(x >= 0.0)` is used on purpose throughout: unlike `x < 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod a2c;
pub mod adam;
pub mod belief;
pub mod env;
pub mod error;
pub mod eval;
pub mod mlp;
pub mod model;
pub mod policy;
pub mod reward;

pub use a2c::{train, Agent, Critic, EpisodeStats, TrainConfig, TrainOutcome};
pub use adam::AdamState;
pub use belief::{apply_bayes_operator, Belief, State};
pub use env::{run_episode, EnvConfig, EpisodeLog, Environment, ExperienceTuple};
pub use error::{Error, ErrorKind, Result};
pub use eval::{evaluate, exact_oracle, summarize_csv, sweep, EvalReport, OracleResult};
pub use mlp::Mlp;
pub use model::{generate_gaussian_model, tiny_model, GeneratorSpec, ModelSpec, ObservationModel, Violation};
pub use policy::{ActionDistribution, ActorHeadKind, ActorNetwork, Policy, RandomPolicy, StoredPolicy};
pub use reward::{InfoEstimator, RewardKind};
