//! Flag definitions. Every flag can also be set in the `--config` file under
//! a table named after the subcommand, with the same (kebab-case) key.
//! Flags given on the command line win over the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "privrelease", version, about = "Privacy-aware sequential data release: simulate, train, evaluate")]
pub struct Cli {
    /// TOML file with one table per subcommand, keys named like the flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the Gaussian-derived observation model.
    GenModel(GenModelArgs),
    /// Write a fixed-probability baseline policy file.
    Baseline(BaselineArgs),
    /// Train an actor-critic policy.
    Train(TrainArgs),
    /// Evaluate one policy at one threshold.
    Eval(EvalArgs),
    /// Evaluate several policies across thresholds.
    Sweep(SweepArgs),
    /// Exact enumeration on a tiny instance, compared against Monte Carlo.
    Oracle(OracleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenModel(_) => "gen-model",
            Command::Baseline(_) => "baseline",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Oracle(_) => "oracle",
        }
    }
}

macro_rules! merge_options {
    ($dst:expr, $src:expr; $($field:ident),* $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field; } )*
    };
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenModelArgs {
    /// Number of secret hypotheses N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of useful hypotheses M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of release mechanisms |A|.
    #[arg(long)]
    pub actions: Option<usize>,
    /// Observation alphabet size |Z|.
    #[arg(long)]
    pub obs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_high: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_high: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenModelArgs {
    fn merge(&mut self, file: Self) {
        merge_options!(self, file; n, m, actions, obs, sigma_low, sigma_high, grid_low, grid_high, seed, out);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BaselineArgs {
    /// Comma-separated action probabilities, e.g. 0.3,0.6,0.1.
    #[arg(long)]
    pub probs: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output policy file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BaselineArgs {
    fn merge(&mut self, file: Self) {
        merge_options!(self, file; probs, seed, out);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Confidence threshold on the secret.
    #[arg(long)]
    pub ls: Option<f64>,
    /// belief | info
    #[arg(long)]
    pub reward: Option<String>,
    /// kl | entropy
    #[arg(long)]
    pub info_estimator: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lr_actor: Option<f64>,
    #[arg(long)]
    pub lr_critic: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub entropy_coeff: Option<f64>,
    /// softmax | dirichlet
    #[arg(long)]
    pub head: Option<String>,
    /// Comma-separated hidden layer sizes.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output policy file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training-curve CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

impl TrainArgs {
    fn merge(&mut self, file: Self) {
        merge_options!(self, file; model, ls, reward, info_estimator, episodes, gamma, lr_actor, lr_critic,
            v_max, entropy_coeff, head, hidden, max_steps, seed, out, log);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Policy file (trained or baseline).
    #[arg(long, conflicts_with = "probs")]
    pub policy: Option<PathBuf>,
    /// Inline fixed action probabilities instead of a policy file.
    #[arg(long)]
    pub probs: Option<String>,
    /// Label for the report row.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub ls: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; the table is printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dump the per-step trace of the first episode.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl EvalArgs {
    fn merge(&mut self, file: Self) {
        merge_options!(self, file; model, policy, probs, name, ls, episodes, max_steps, seed, out, trace);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Policy file; repeatable.
    #[arg(long = "policy")]
    #[serde(default)]
    pub policies: Vec<PathBuf>,
    /// Fixed action probabilities; repeatable.
    #[arg(long = "probs")]
    #[serde(default)]
    pub probs: Vec<String>,
    /// Comma-separated thresholds.
    #[arg(long)]
    pub ls: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SweepArgs {
    fn merge(&mut self, file: Self) {
        if self.policies.is_empty() {
            self.policies = file.policies;
        }
        if self.probs.is_empty() {
            self.probs = file.probs;
        }
        merge_options!(self, file; model, ls, episodes, max_steps, seed, out);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OracleArgs {
    /// Model file; a built-in 2x2x2x3 instance is used when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, conflicts_with = "probs")]
    pub policy: Option<PathBuf>,
    /// Fixed action probabilities (uniform when neither this nor --policy is set).
    #[arg(long)]
    pub probs: Option<String>,
    #[arg(long)]
    pub ls: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Monte Carlo episodes for the comparison.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional JSON output with the exact values, estimates and verdict.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl OracleArgs {
    fn merge(&mut self, file: Self) {
        merge_options!(self, file; model, policy, probs, ls, horizon, episodes, seed, out);
    }
}

/// Fills unset flags from the subcommand's table in the config file.
pub fn apply_config_file(command: &mut Command, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    let name = command.name();
    let Some(section) = table.remove(name) else {
        return Ok(());
    };
    let bad = |e: toml::de::Error| CliError::Config(format!("{} [{name}]: {e}", path.display()));
    match command {
        Command::GenModel(a) => a.merge(section.try_into().map_err(bad)?),
        Command::Baseline(a) => a.merge(section.try_into().map_err(bad)?),
        Command::Train(a) => a.merge(section.try_into().map_err(bad)?),
        Command::Eval(a) => a.merge(section.try_into().map_err(bad)?),
        Command::Sweep(a) => a.merge(section.try_into().map_err(bad)?),
        Command::Oracle(a) => a.merge(section.try_into().map_err(bad)?),
    }
    Ok(())
}

pub fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("--{flag}: cannot parse '{s}'")))
        })
        .collect()
}
