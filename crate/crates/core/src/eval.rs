//! Monte Carlo evaluation of frozen policies, threshold sweeps, and an exact
//! enumeration oracle for tiny instances.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, State};
use crate::env::{check_ls, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::model::ObservationModel;
use crate::policy::Policy;
use crate::reward::{per_step_mi, realized_info_reward};

/// Largest `(|A|·|Z|)^horizon · N·M` the oracle will enumerate.
pub const ORACLE_BUDGET: f64 = 1e7;

/// Neumaier-compensated running sums of a sample and its squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: usize,
    sum: f64,
    sum_c: f64,
    sq: f64,
    sq_c: f64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        neumaier(&mut self.sum, &mut self.sum_c, x);
        neumaier(&mut self.sq, &mut self.sq_c, x * x);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.sum + self.sum_c) / self.n as f64
    }

    /// Sample standard deviation (zero for fewer than two samples).
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sq + self.sq_c) - n * mean * mean) / (n - 1.0);
        var.max(0.0).sqrt()
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.std() / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub ls: f64,
    pub seed: u64,
    pub episodes: usize,
    /// Mean terminal belief on the true useful hypothesis, `E[β_τ(U)]`.
    pub conf_true_u: f64,
    pub conf_true_u_se: f64,
    /// Mean of `max_u β_τ(u)`, the quantity the belief reward pays.
    pub conf_max_u: f64,
    pub conf_max_u_se: f64,
    /// Mean summed realized information reward, estimating `I(U; Z^τ, A^τ)`.
    pub mi_nats: f64,
    pub mi_se: f64,
    /// Decision-time statistics over terminated episodes; NaN if none terminated.
    pub tau_mean: f64,
    pub tau_std: f64,
    pub tau_se: f64,
    pub terminated: usize,
    pub truncated: usize,
    pub truncation_rate: f64,
}

/// Runs `episodes` episodes of a frozen policy on the streams of `env_cfg.seed`.
///
/// Confidence metrics use the last belief of every episode (the crossing
/// belief when terminated, the belief at the step cap when truncated).
pub fn evaluate<P: Policy + ?Sized>(env_cfg: &EnvConfig, policy: &P, episodes: usize) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let mut env = Environment::new(env_cfg.clone())?;
    let mut conf_true = RunningStats::default();
    let mut conf_max = RunningStats::default();
    let mut mi = RunningStats::default();
    let mut tau = RunningStats::default();
    let mut truncated = 0;
    for episode in 0..episodes {
        env.reset(episode as u64);
        let mut info = 0.0;
        while !env.is_done() {
            let dist = match env.state() {
                State::Belief(b) => policy.act(b)?,
                State::Final => break,
            };
            let t = env.step(&dist)?;
            if let (State::Belief(prev), State::Belief(next)) = (&t.state, &t.next_state) {
                info += realized_info_reward(prev, next)?;
            }
        }
        let (_, u_true) = env.truth();
        let last = env.last_belief();
        conf_true.push(last.marginal_useful()[u_true]);
        conf_max.push(last.max_useful());
        mi.push(info);
        if env.truncated() {
            truncated += 1;
        } else {
            tau.push(env.steps_taken() as f64);
        }
    }
    Ok(EvalReport {
        policy: String::new(),
        ls: env_cfg.ls,
        seed: env_cfg.seed,
        episodes,
        conf_true_u: conf_true.mean(),
        conf_true_u_se: conf_true.se(),
        conf_max_u: conf_max.mean(),
        conf_max_u_se: conf_max.se(),
        mi_nats: mi.mean(),
        mi_se: mi.se(),
        tau_mean: tau.mean(),
        tau_std: tau.std(),
        tau_se: tau.se(),
        terminated: tau.count(),
        truncated,
        truncation_rate: truncated as f64 / episodes as f64,
    })
}

/// Evaluates every `(policy, ls)` pair, policies outermost.
pub fn sweep(
    base: &EnvConfig,
    policies: &[(&str, &dyn Policy)],
    ls_list: &[f64],
    episodes: usize,
) -> Result<Vec<EvalReport>> {
    if policies.is_empty() || ls_list.is_empty() {
        return Err(Error::config("sweep needs at least one policy and one threshold"));
    }
    let mut reports = Vec::with_capacity(policies.len() * ls_list.len());
    for (name, policy) in policies {
        for &ls in ls_list {
            let cfg = EnvConfig { ls, ..base.clone() };
            let mut report = evaluate(&cfg, *policy, episodes)?;
            report.policy = name.to_string();
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Exact expectations over every `(a, z)` path up to the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// `E[β_τ(U_true)]`, last belief of each path.
    pub expected_conf_true_u: f64,
    /// `E[max_u β_τ(u)]`.
    pub expected_conf_max_u: f64,
    /// `I(U; path)` from the joint path/hypothesis distribution.
    pub exact_joint_mi: f64,
    /// Path-probability-weighted sum of per-step conditional MI over live nodes.
    pub chain_rule_mi: f64,
    /// `E[τ | threshold reached within the horizon]`; NaN if never reached.
    pub expected_tau: f64,
    pub termination_prob: f64,
}

struct OracleAcc {
    conf_true: f64,
    conf_max: f64,
    joint_mi: f64,
    chain_mi: f64,
    tau: f64,
    term_prob: f64,
}

/// Enumerates every path with its exact probability
/// `Σ_{s,u} prior(s,u) Π_t π(a_t|β_t) q(z_t|a_t,s,u)`.
///
/// Beliefs along a path are recomputed from the prior and the accumulated
/// likelihood, not by chaining one-step updates.
pub fn exact_oracle<P: Policy + ?Sized>(model: &ObservationModel, policy: &P, ls: f64, horizon: usize) -> Result<OracleResult> {
    check_ls(ls)?;
    let spec = *model.spec();
    let required = ((spec.n_actions * spec.n_obs) as f64).powi(horizon as i32) * spec.n_hypotheses() as f64;
    if required > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            required,
            budget: ORACLE_BUDGET,
        });
    }
    let prior = model.prior();
    let prior_u = Belief::prior(model).marginal_useful();
    let mut acc = OracleAcc {
        conf_true: 0.0,
        conf_max: 0.0,
        joint_mi: 0.0,
        chain_mi: 0.0,
        tau: 0.0,
        term_prob: 0.0,
    };
    // joint[s*M+u] = prior(s,u) · Π π · Π q along the path
    let joint = prior.to_vec();
    visit(model, policy, ls, horizon, 0, joint, &prior_u, &mut acc)?;
    Ok(OracleResult {
        expected_conf_true_u: acc.conf_true,
        expected_conf_max_u: acc.conf_max,
        exact_joint_mi: acc.joint_mi,
        chain_rule_mi: acc.chain_mi,
        expected_tau: if acc.term_prob > 0.0 { acc.tau / acc.term_prob } else { f64::NAN },
        termination_prob: acc.term_prob,
    })
}

#[allow(clippy::too_many_arguments)]
fn visit<P: Policy + ?Sized>(
    model: &ObservationModel,
    policy: &P,
    ls: f64,
    horizon: usize,
    depth: usize,
    joint: Vec<f64>,
    prior_u: &[f64],
    acc: &mut OracleAcc,
) -> Result<()> {
    let spec = model.spec();
    let m = spec.n_useful;
    let p_path: f64 = joint.iter().sum();
    let belief = Belief::new(spec.n_secret, m, joint.iter().map(|x| x / p_path).collect())
        .or_else(|_| {
            // renormalize away rounding before validation
            let raw: Vec<f64> = joint.iter().map(|x| x / p_path).collect();
            let t: f64 = raw.iter().sum();
            Belief::new(spec.n_secret, m, raw.into_iter().map(|x| x / t).collect())
        })?;
    let reached = belief.reaches(ls);
    if reached || depth == horizon {
        let mut joint_u = vec![0.0; m];
        for (i, &p) in joint.iter().enumerate() {
            joint_u[i % m] += p;
        }
        for (u, &pu) in joint_u.iter().enumerate() {
            // Σ_s p(path, s, u) · β_path(u)
            acc.conf_true += pu * (pu / p_path);
            if pu > 0.0 {
                acc.joint_mi += pu * (pu / (p_path * prior_u[u])).ln();
            }
        }
        acc.conf_max += joint_u.iter().copied().fold(0.0, f64::max);
        if reached {
            acc.tau += p_path * depth as f64;
            acc.term_prob += p_path;
        }
        return Ok(());
    }
    let dist = policy.act(&belief)?;
    acc.chain_mi += p_path * per_step_mi(&belief, dist.probs(), model);
    for (a, &pa) in dist.probs().iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        for z in 0..spec.n_obs {
            let child: Vec<f64> = joint
                .iter()
                .enumerate()
                .map(|(i, &p)| p * pa * model.q(a, i / m, i % m, z))
                .collect();
            if child.iter().sum::<f64>() > 0.0 {
                visit(model, policy, ls, horizon, depth + 1, child, prior_u, acc)?;
            }
        }
    }
    Ok(())
}

/// Convenience for evaluating a policy on a shared model with default environment settings.
pub fn env_for(model: Arc<ObservationModel>, ls: f64, seed: u64, max_steps: usize) -> EnvConfig {
    EnvConfig::new(model, ls).with_seed(seed).with_max_steps(max_steps)
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "policy",
    "ls",
    "conf_true_u",
    "conf_max_u",
    "mi_nats",
    "tau_mean",
    "tau_std",
    "truncation_rate",
    "episodes",
    "seed",
];

/// Formats a float with 9 significant digits.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

/// Writes the summary table; lines of `comment` are prefixed with `# `.
pub fn write_summary<W: Write>(reports: &[EvalReport], mut out: W, comment: Option<&str>) -> Result<()> {
    if let Some(text) = comment {
        for line in text.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        w.write_record([
            r.policy.clone(),
            sig9(r.ls),
            sig9(r.conf_true_u),
            sig9(r.conf_max_u),
            sig9(r.mi_nats),
            sig9(r.tau_mean),
            sig9(r.tau_std),
            sig9(r.truncation_rate),
            r.episodes.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One report per row, with the [`SUMMARY_HEADER`] columns.
pub fn summarize_csv(reports: &[EvalReport], path: impl AsRef<Path>) -> Result<()> {
    write_summary(reports, fs::File::create(path)?, None)
}

/// A parsed row of a summary file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub ls: f64,
    pub conf_true_u: f64,
    pub conf_max_u: f64,
    pub mi_nats: f64,
    pub tau_mean: f64,
    pub tau_std: f64,
    pub truncation_rate: f64,
    pub episodes: usize,
    pub seed: u64,
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    Ok(reader.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?)
}
