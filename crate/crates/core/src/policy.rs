//! Release policies `π(a | β)`: fixed random baselines and the neural actor.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::mlp::{ForwardCache, Mlp};

/// Floor applied to probabilities inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Version written into, and required from, policy files.
pub const POLICY_FILE_VERSION: u32 = 1;

const PROB_TOL: f64 = 1e-10;

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::config("action distribution must not be empty"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config(format!("action probabilities must be finite and >= 0, got {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::config(format!("action probabilities sum to {sum}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn log_prob_of(&self, action: usize) -> f64 {
        self.probs[action].max(LOG_FLOOR).ln()
    }

    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, uniform: f64) -> usize {
        sample_index(&self.probs, uniform)
    }
}

/// Index `i` such that the cumulative mass first exceeds `uniform`,
/// skipping zero-probability entries.
pub(crate) fn sample_index(probs: &[f64], uniform: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if uniform < acc {
            return i;
        }
    }
    last
}

/// Anything that maps a live belief to an action distribution.
///
/// Policies see the belief only; the hidden hypotheses never reach them.
pub trait Policy {
    fn act(&self, belief: &Belief) -> Result<ActionDistribution>;

    fn n_actions(&self) -> usize;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, belief: &Belief) -> Result<ActionDistribution> {
        (**self).act(belief)
    }

    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&self, belief: &Belief) -> Result<ActionDistribution> {
        (**self).act(belief)
    }

    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }
}

/// A belief-independent policy with fixed action probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPolicy {
    dist: ActionDistribution,
}

impl RandomPolicy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Self {
            dist: ActionDistribution::new(probs)?,
        })
    }

    pub fn uniform(n_actions: usize) -> Self {
        Self {
            dist: ActionDistribution::uniform(n_actions),
        }
    }

    pub fn probs(&self) -> &[f64] {
        self.dist.probs()
    }
}

impl Policy for RandomPolicy {
    fn act(&self, _belief: &Belief) -> Result<ActionDistribution> {
        Ok(self.dist.clone())
    }

    fn n_actions(&self) -> usize {
        self.dist.len()
    }
}

/// How the actor's output layer becomes action probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorHeadKind {
    /// Softmax over the output logits.
    #[default]
    SoftmaxDirect,
    /// Softplus concentrations `ξ`; the action probabilities are the
    /// Dirichlet mean `ξ_a / Σ ξ`.
    DirichletCompound,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dirichlet concentrations from raw outputs. Strictly positive for finite input.
pub fn dirichlet_concentrations(raw: &[f64]) -> Vec<f64> {
    raw.iter().map(|&o| softplus(o).max(f64::MIN_POSITIVE)).collect()
}

/// Dirichlet mean `ξ / Σ ξ`.
pub fn dirichlet_mean(concentrations: &[f64]) -> Vec<f64> {
    let total: f64 = concentrations.iter().sum();
    concentrations.iter().map(|&c| c / total).collect()
}

/// The actor: an MLP over the flattened belief plus an output head.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorNetwork {
    pub net: Mlp,
    pub head: ActorHeadKind,
}

/// Forward-pass record needed to backpropagate an actor loss.
#[derive(Debug, Clone)]
pub struct ActorForward {
    pub cache: ForwardCache,
    pub dist: ActionDistribution,
}

impl ActorNetwork {
    pub fn new(net: Mlp, head: ActorHeadKind) -> Self {
        Self { net, head }
    }

    fn head_probs(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("actor produced non-finite output {raw:?}")));
        }
        Ok(match self.head {
            ActorHeadKind::SoftmaxDirect => softmax(raw),
            ActorHeadKind::DirichletCompound => dirichlet_mean(&dirichlet_concentrations(raw)),
        })
    }

    pub fn forward(&self, belief: &Belief) -> Result<ActorForward> {
        let cache = self.net.forward_cached(belief.as_slice())?;
        let probs = self.head_probs(cache.output())?;
        Ok(ActorForward {
            cache,
            dist: ActionDistribution { probs },
        })
    }

    /// Gradient of `−coef · ln π(a) − entropy_coeff · H(π)` with respect to
    /// the raw network outputs.
    pub fn output_grad(&self, fwd: &ActorForward, action: usize, coef: f64, entropy_coeff: f64) -> Vec<f64> {
        let raw = fwd.cache.output();
        let p = fwd.dist.probs();
        let n = p.len();
        // dL/dp, used for the entropy term and for the Dirichlet head
        match self.head {
            ActorHeadKind::SoftmaxDirect => {
                let mut g: Vec<f64> = p.iter().map(|&pk| coef * pk).collect();
                g[action] -= coef;
                if entropy_coeff != 0.0 {
                    let h = fwd.dist.entropy();
                    for (gk, &pk) in g.iter_mut().zip(p) {
                        // dH/dlogit_k = −p_k (ln p_k + H)
                        let ln_pk = if pk > 0.0 { pk.ln() } else { 0.0 };
                        *gk += entropy_coeff * pk * (ln_pk + h);
                    }
                }
                g
            }
            ActorHeadKind::DirichletCompound => {
                let xi = dirichlet_concentrations(raw);
                let total: f64 = xi.iter().sum();
                // dL/dξ_k for the log-probability term
                let mut g_xi: Vec<f64> = vec![coef / total; n];
                g_xi[action] -= coef / xi[action];
                if entropy_coeff != 0.0 {
                    // dH/dp_j = −(ln p_j + 1); dp_j/dξ_k = (δ_jk − p_j) / Σξ
                    let dh_dp: Vec<f64> = p
                        .iter()
                        .map(|&pj| -(if pj > 0.0 { pj.ln() } else { 0.0 } + 1.0))
                        .collect();
                    let weighted: f64 = dh_dp.iter().zip(p).map(|(d, pj)| d * pj).sum();
                    for (k, g) in g_xi.iter_mut().enumerate() {
                        let dh_dxi = (dh_dp[k] - weighted) / total;
                        *g -= entropy_coeff * dh_dxi;
                    }
                }
                g_xi.iter().zip(raw).map(|(g, &o)| g * sigmoid(o)).collect()
            }
        }
    }

    /// Actor loss `−coef · ln π(a) − entropy_coeff · H(π)` at a forward record.
    pub fn loss(&self, fwd: &ActorForward, action: usize, coef: f64, entropy_coeff: f64) -> f64 {
        -coef * fwd.dist.log_prob_of(action) - entropy_coeff * fwd.dist.entropy()
    }
}

impl Policy for ActorNetwork {
    fn act(&self, belief: &Belief) -> Result<ActionDistribution> {
        let raw = self.net.forward(belief.as_slice())?;
        Ok(ActionDistribution {
            probs: self.head_probs(&raw)?,
        })
    }

    fn n_actions(&self) -> usize {
        self.net.output_dim()
    }
}

/// Any policy that can be stored in a policy file.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredPolicy {
    Random(RandomPolicy),
    Actor(ActorNetwork),
}

impl Policy for StoredPolicy {
    fn act(&self, belief: &Belief) -> Result<ActionDistribution> {
        match self {
            StoredPolicy::Random(p) => p.act(belief),
            StoredPolicy::Actor(p) => p.act(belief),
        }
    }

    fn n_actions(&self) -> usize {
        match self {
            StoredPolicy::Random(p) => p.n_actions(),
            StoredPolicy::Actor(p) => p.n_actions(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum PolicyBody {
    Random {
        probs: Vec<f64>,
    },
    Actor {
        head: ActorHeadKind,
        layer_sizes: Vec<usize>,
        params: Vec<f64>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    version: u32,
    policy: PolicyBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl StoredPolicy {
    pub fn save(&self, path: impl AsRef<Path>, provenance: Option<serde_json::Value>) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        out.write_all(self.to_json_string(provenance)?.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn to_json_string(&self, provenance: Option<serde_json::Value>) -> Result<String> {
        let policy = match self {
            StoredPolicy::Random(p) => PolicyBody::Random {
                probs: p.probs().to_vec(),
            },
            StoredPolicy::Actor(a) => PolicyBody::Actor {
                head: a.head,
                layer_sizes: a.net.sizes().to_vec(),
                params: a.net.params().to_vec(),
            },
        };
        let file = PolicyFile {
            version: POLICY_FILE_VERSION,
            policy,
            provenance,
        };
        serde_json::to_string_pretty(&file).map_err(Error::from_json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text).map_err(Error::from_json)?;
        if file.version != POLICY_FILE_VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: POLICY_FILE_VERSION,
            });
        }
        Ok(match file.policy {
            PolicyBody::Random { probs } => StoredPolicy::Random(RandomPolicy::new(probs)?),
            PolicyBody::Actor {
                head,
                layer_sizes,
                params,
            } => StoredPolicy::Actor(ActorNetwork::new(Mlp::from_parts(layer_sizes, params)?, head)),
        })
    }
}
