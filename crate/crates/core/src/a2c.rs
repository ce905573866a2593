//! Advantage actor-critic trained online, one transition at a time.
//!
//! The critic `V(x) = v_max · tanh(o(x))` minimizes `δ²` by semi-gradient
//! descent (the TD target is held fixed); the actor minimizes `−ln π(a|x) · δ`.
//! Both use ADAM. Terminal and truncated transitions bootstrap from zero.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::belief::{Belief, State};
use crate::env::{EnvConfig, Environment, ExperienceTuple};
use crate::error::{Error, Result};
use crate::mlp::{ForwardCache, Mlp};
use crate::policy::{ActorHeadKind, ActorNetwork};

/// Shrink factor for the initial output-layer weights of both networks.
const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub episodes: usize,
    /// Critic output bound; `None` means `max(1, ln M)`.
    pub v_max: Option<f64>,
    pub seed: u64,
    pub head: ActorHeadKind,
    pub entropy_coeff: f64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.999,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            episodes: 20_000,
            v_max: None,
            seed: 0,
            head: ActorHeadKind::SoftmaxDirect,
            entropy_coeff: 0.0,
            hidden: vec![64, 64],
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return Err(Error::config("learning rates must be > 0"));
        }
        if let Some(v) = self.v_max {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("v_max must be > 0, got {v}")));
            }
        }
        if !(self.entropy_coeff >= 0.0) {
            return Err(Error::config("entropy_coeff must be >= 0"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config(format!("invalid hidden sizes {:?}", self.hidden)));
        }
        Ok(())
    }

    pub fn resolved_v_max(&self, n_useful: usize) -> f64 {
        self.v_max.unwrap_or_else(|| (n_useful as f64).ln().max(1.0))
    }
}

/// State-value network with a bounded output.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub net: Mlp,
    pub v_max: f64,
}

impl Critic {
    pub fn new(net: Mlp, v_max: f64) -> Self {
        Self { net, v_max }
    }

    pub fn value(&self, belief: &Belief) -> Result<f64> {
        let out = self.net.forward(belief.as_slice())?;
        Ok(self.v_max * out[0].tanh())
    }

    /// Value together with the cache and `dV/do` at the raw output.
    pub fn forward(&self, belief: &Belief) -> Result<(ForwardCache, f64, f64)> {
        let cache = self.net.forward_cached(belief.as_slice())?;
        let t = cache.output()[0].tanh();
        Ok((cache, self.v_max * t, self.v_max * (1.0 - t * t)))
    }
}

/// `δ = r + γ V(x') − V(x)`.
pub fn td_error(reward: f64, gamma: f64, v_next: f64, v_curr: f64) -> f64 {
    reward + gamma * v_next - v_curr
}

/// `V(x')`, or zero when the transition ends the episode.
pub fn bootstrap_value(critic: &Critic, tuple: &ExperienceTuple) -> Result<f64> {
    match (&tuple.next_state, tuple.ends_episode()) {
        (State::Belief(b), false) => critic.value(b),
        _ => Ok(0.0),
    }
}

/// Loss `(target − V(x))²` and its semi-gradient with the target held fixed.
pub fn critic_loss_and_grad(critic: &Critic, belief: &Belief, target: f64) -> Result<(f64, f64, Vec<f64>)> {
    let (cache, v, dv) = critic.forward(belief)?;
    let delta = target - v;
    let grad = critic.net.backward(&cache, &[-2.0 * delta * dv]);
    Ok((delta * delta, delta, grad))
}

/// Loss `−ln π(a|x) · δ − c·H(π)` and its gradient, `δ` held constant.
pub fn actor_loss_and_grad(
    actor: &ActorNetwork,
    belief: &Belief,
    action: usize,
    delta: f64,
    entropy_coeff: f64,
) -> Result<(f64, Vec<f64>)> {
    let fwd = actor.forward(belief)?;
    let loss = actor.loss(&fwd, action, delta, entropy_coeff);
    let d_out = actor.output_grad(&fwd, action, delta, entropy_coeff);
    Ok((loss, actor.net.backward(&fwd.cache, &d_out)))
}

fn ensure_finite(grad: &[f64], what: &str) -> Result<()> {
    if let Some((i, g)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        let norm = grad.iter().filter(|g| g.is_finite()).map(|g| g * g).sum::<f64>().sqrt();
        return Err(Error::Numeric(format!(
            "{what} gradient is non-finite at parameter {i} ({g}); finite-part norm {norm}"
        )));
    }
    Ok(())
}

/// Result of one critic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticStep {
    pub delta: f64,
    pub loss: f64,
}

/// One ADAM step on the critic for a transition. Returns the TD error
/// computed with the pre-update critic.
pub fn critic_update(critic: &mut Critic, adam: &mut AdamState, tuple: &ExperienceTuple, cfg: &TrainConfig) -> Result<CriticStep> {
    let belief = tuple
        .state
        .belief()
        .ok_or_else(|| Error::config("critic update needs a live source state"))?;
    let v_next = bootstrap_value(critic, tuple)?;
    let target = tuple.reward + cfg.gamma * v_next;
    let (loss, delta, grad) = critic_loss_and_grad(critic, belief, target)?;
    ensure_finite(&grad, "critic")?;
    adam.step(critic.net.params_mut(), &grad, cfg.lr_critic);
    Ok(CriticStep { delta, loss })
}

/// One ADAM step on the actor for a transition and TD error. Returns the loss.
pub fn actor_update(
    actor: &mut ActorNetwork,
    adam: &mut AdamState,
    tuple: &ExperienceTuple,
    delta: f64,
    cfg: &TrainConfig,
) -> Result<f64> {
    let belief = tuple
        .state
        .belief()
        .ok_or_else(|| Error::config("actor update needs a live source state"))?;
    let (loss, grad) = actor_loss_and_grad(actor, belief, tuple.action, delta, cfg.entropy_coeff)?;
    ensure_finite(&grad, "actor")?;
    adam.step(actor.net.params_mut(), &grad, cfg.lr_actor);
    Ok(loss)
}

/// Actor, critic and their optimizer states.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: ActorNetwork,
    pub critic: Critic,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
}

impl Agent {
    /// Fresh networks for an `N·M`-dimensional belief input and `|A|` actions.
    pub fn new(input_dim: usize, n_actions: usize, n_useful: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let mut actor_sizes = vec![input_dim];
        actor_sizes.extend(&cfg.hidden);
        let mut critic_sizes = actor_sizes.clone();
        actor_sizes.push(n_actions);
        critic_sizes.push(1);
        let actor = ActorNetwork::new(Mlp::init(&actor_sizes, OUTPUT_INIT_SCALE, &mut rng)?, cfg.head);
        let critic = Critic::new(Mlp::init(&critic_sizes, OUTPUT_INIT_SCALE, &mut rng)?, cfg.resolved_v_max(n_useful));
        Ok(Self {
            actor_adam: AdamState::new(actor.net.n_params()),
            critic_adam: AdamState::new(critic.net.n_params()),
            actor,
            critic,
        })
    }

    /// Critic then actor update for one transition.
    pub fn learn(&mut self, tuple: &ExperienceTuple, cfg: &TrainConfig) -> Result<(CriticStep, f64)> {
        let c = critic_update(&mut self.critic, &mut self.critic_adam, tuple, cfg)?;
        let a = actor_update(&mut self.actor, &mut self.actor_adam, tuple, c.delta, cfg)?;
        Ok((c, a))
    }
}

/// Per-episode training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub ret: f64,
    /// Steps taken (equals the decision time unless truncated).
    pub tau: usize,
    pub truncated: bool,
    pub critic_loss_mean: f64,
    pub actor_loss_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub actor: ActorNetwork,
    pub critic: Critic,
    pub log: Vec<EpisodeStats>,
}

/// Trains from scratch. Episodes run on the random streams of `cfg.seed`
/// (overriding `env_cfg.seed`), so a run is reproducible bit for bit.
pub fn train(env_cfg: &EnvConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(env_cfg, cfg, |_| {})
}

/// [`train`] with a callback invoked after every episode.
pub fn train_with(env_cfg: &EnvConfig, cfg: &TrainConfig, mut on_episode: impl FnMut(&EpisodeStats)) -> Result<TrainOutcome> {
    cfg.check()?;
    let spec = *env_cfg.model.spec();
    let mut agent = Agent::new(spec.n_hypotheses(), spec.n_actions, spec.n_useful, cfg)?;
    let mut env = Environment::new(env_cfg.clone().with_seed(cfg.seed))?;
    let mut log = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let reset = env.reset(episode as u64);
        let mut ret = reset.reward;
        let (mut closs, mut aloss) = (0.0, 0.0);
        while !env.is_done() {
            let probs = match env.state() {
                State::Belief(b) => crate::policy::Policy::act(&agent.actor, b)?,
                State::Final => break,
            };
            let tuple = env.step(&probs)?;
            ret += tuple.reward;
            let (c, a) = agent.learn(&tuple, cfg)?;
            closs += c.loss;
            aloss += a;
        }
        let tau = env.steps_taken();
        let denom = tau.max(1) as f64;
        let stats = EpisodeStats {
            episode,
            ret,
            tau,
            truncated: env.truncated(),
            critic_loss_mean: closs / denom,
            actor_loss_mean: aloss / denom,
        };
        on_episode(&stats);
        log.push(stats);
    }
    Ok(TrainOutcome {
        actor: agent.actor,
        critic: agent.critic,
        log,
    })
}

/// Writes the training curve as `episode,return,tau,critic_loss_mean,actor_loss_mean`.
pub fn write_train_log<W: Write>(log: &[EpisodeStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "return", "tau", "critic_loss_mean", "actor_loss_mean"])?;
    for s in log {
        w.write_record([
            s.episode.to_string(),
            s.ret.to_string(),
            s.tau.to_string(),
            s.critic_loss_mean.to_string(),
            s.actor_loss_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
