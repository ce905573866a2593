//! Utility signals: the terminal belief reward and the information reward
//! built from the conditional mutual information between `U` and one
//! released `(z, a)` pair. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, State};
use crate::error::{Error, Result};
use crate::model::ObservationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// Pays `max_u β(u)` once the secret confidence reaches the threshold.
    #[default]
    BeliefReward,
    /// Pays the realized information gained about `U` at every live step.
    InfoReward,
}

/// Pointwise estimator used for the realized information reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoEstimator {
    /// `KL(β_{t+1}(u) ‖ β_t(u))`, never negative.
    #[default]
    KlDivergence,
    /// `H(β_t(u)) − H(β_{t+1}(u))`, same expectation but can be negative.
    EntropyReduction,
}

/// `r_β`: zero below the threshold and at `F`, `max_u β(u)` at or above it.
pub fn belief_reward(state: &State, ls: f64) -> f64 {
    match state {
        State::Belief(b) if b.reaches(ls) => b.max_useful(),
        _ => 0.0,
    }
}

/// Conditional mutual information `I(U; Z_t, A_t | β)` in nats.
///
/// The action probability cancels inside the logarithm, leaving
/// `Σ_{a,z,u} π(a) p(z,u|a) ln[p(z,u|a) / (β(u) p(z|a))]`.
pub fn per_step_mi(belief: &Belief, action_probs: &[f64], model: &ObservationModel) -> f64 {
    let spec = model.spec();
    let marg_u = belief.marginal_useful();
    let mut joint_u = vec![0.0; spec.n_useful];
    let mut total = 0.0;
    for (a, &pa) in action_probs.iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for z in 0..spec.n_obs {
            joint_u.iter_mut().for_each(|x| *x = 0.0);
            for s in 0..spec.n_secret {
                for (u, j) in joint_u.iter_mut().enumerate() {
                    *j += model.q(a, s, u, z) * belief.get(s, u);
                }
            }
            let pz: f64 = joint_u.iter().sum();
            if pz <= 0.0 {
                continue;
            }
            for (u, &j) in joint_u.iter().enumerate() {
                if j > 0.0 {
                    inner += j * (j / (marg_u[u] * pz)).ln();
                }
            }
        }
        total += pa * inner;
    }
    total.max(0.0)
}

/// `KL(next(u) ‖ prev(u))` on the useful marginals.
pub fn realized_info_reward(prev: &Belief, next: &Belief) -> Result<f64> {
    kl_divergence(&next.marginal_useful(), &prev.marginal_useful())
}

/// Drop in entropy of the useful marginal.
pub fn entropy_reduction_reward(prev: &Belief, next: &Belief) -> f64 {
    entropy(&prev.marginal_useful()) - entropy(&next.marginal_useful())
}

pub fn realized_info(prev: &Belief, next: &Belief, estimator: InfoEstimator) -> Result<f64> {
    match estimator {
        InfoEstimator::KlDivergence => realized_info_reward(prev, next),
        InfoEstimator::EntropyReduction => Ok(entropy_reduction_reward(prev, next)),
    }
}

/// `r_I` for one transition `x → next`, where `prev` is the belief held in `x`.
///
/// Zero when `x` is `F`, when `x` is already at the threshold (the
/// transition enters `F` without an update), or when `next` is `F`.
pub fn info_reward(state: &State, next: &State, ls: f64, estimator: InfoEstimator) -> Result<f64> {
    match (state, next) {
        (State::Belief(prev), State::Belief(next)) if !prev.reaches(ls) => realized_info(prev, next, estimator),
        _ => Ok(0.0),
    }
}

/// Chain rule: the episode-level information is the sum of per-step terms.
pub fn accumulate_total_mi(per_step: &[f64]) -> f64 {
    per_step.iter().sum()
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::InconsistentUpdate(format!(
                "posterior puts mass {pi} on useful hypothesis {i} that the prior excludes"
            )));
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl.max(0.0))
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}
