//! Every default the command line applies, in one place.
//!
//! | flag              | default                  |
//! |-------------------|--------------------------|
//! | `--n`, `--m`      | 3, 3                     |
//! | `--actions`       | 3                        |
//! | `--obs`           | 21                       |
//! | `--sigma-low/high`| 0.5 / 1.5                |
//! | `--grid-low/high` | -3 / 6                   |
//! | `--seed`          | 0                        |
//! | `--ls`            | 0.8                      |
//! | `--ls` (sweep)    | 0.65,0.8,0.9,0.95        |
//! | `--reward`        | belief                   |
//! | `--info-estimator`| kl                       |
//! | `--episodes`      | 20000 (train), 10000 (eval, sweep), 100000 (oracle) |
//! | `--gamma`         | 0.999                    |
//! | `--lr-actor`      | 1e-4                     |
//! | `--lr-critic`     | 1e-3                     |
//! | `--v-max`         | max(1, ln M)             |
//! | `--entropy-coeff` | 0                        |
//! | `--head`          | softmax                  |
//! | `--hidden`        | 64,64                    |
//! | `--max-steps`     | 5000                     |
//! | `--horizon`       | 4                        |

use privrelease_core::model::GeneratorSpec;

pub const N_SECRET: usize = 3;
pub const N_USEFUL: usize = 3;
pub const N_ACTIONS: usize = 3;
pub const N_OBS: usize = 21;
pub const SIGMA_LOW: f64 = GeneratorSpec::DEFAULT_SIGMA_LOW;
pub const SIGMA_HIGH: f64 = GeneratorSpec::DEFAULT_SIGMA_HIGH;
pub const GRID_LOW: f64 = GeneratorSpec::DEFAULT_GRID_LOW;
pub const GRID_HIGH: f64 = GeneratorSpec::DEFAULT_GRID_HIGH;
pub const SEED: u64 = 0;
pub const LS: f64 = 0.8;
pub const SWEEP_LS: [f64; 4] = [0.65, 0.8, 0.9, 0.95];
pub const TRAIN_EPISODES: usize = 20_000;
pub const EVAL_EPISODES: usize = 10_000;
pub const ORACLE_EPISODES: usize = 100_000;
pub const GAMMA: f64 = 0.999;
pub const LR_ACTOR: f64 = 1e-4;
pub const LR_CRITIC: f64 = 1e-3;
pub const ENTROPY_COEFF: f64 = 0.0;
pub const HIDDEN: [usize; 2] = [64, 64];
pub const MAX_STEPS: usize = privrelease_core::env::DEFAULT_MAX_STEPS;
pub const HORIZON: usize = 4;
pub const ORACLE_SE_TOLERANCE: f64 = 3.0;
