//! Episodic belief-MDP environment.
//!
//! The environment samples the true `(s, u)` pair from the prior at reset and
//! keeps it private. Each step draws an action from the supplied
//! distribution, draws `z ~ q(· | a, s, u)`, applies the Bayes operator and
//! pays the configured reward.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{apply_bayes_operator, Belief, State};
use crate::error::{Error, Result};
use crate::model::ObservationModel;
use crate::policy::{sample_index, ActionDistribution, Policy};
use crate::reward::{belief_reward, info_reward, InfoEstimator, RewardKind};

pub const DEFAULT_MAX_STEPS: usize = 5000;

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub model: Arc<ObservationModel>,
    /// Confidence threshold `L_s` on the secret.
    pub ls: f64,
    pub reward_kind: RewardKind,
    pub info_estimator: InfoEstimator,
    pub max_steps: usize,
    pub seed: u64,
}

impl EnvConfig {
    pub fn new(model: Arc<ObservationModel>, ls: f64) -> Self {
        Self {
            model,
            ls,
            reward_kind: RewardKind::BeliefReward,
            info_estimator: InfoEstimator::KlDivergence,
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
        }
    }

    pub fn with_reward(mut self, kind: RewardKind) -> Self {
        self.reward_kind = kind;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        check_ls(self.ls)?;
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be >= 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_ls(ls: f64) -> Result<()> {
    if ls > 0.0 && ls <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("confidence threshold must lie in (0, 1], got {ls}")))
    }
}

/// Independent random stream for one episode, derived from a master seed.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// One transition `(x_t, π(·|x_t), a_t, r_t, z_t, x_{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceTuple {
    pub state: State,
    pub action_probs: ActionDistribution,
    pub action: usize,
    pub reward: f64,
    pub observation: usize,
    /// Post-update belief. When `terminal` is set the environment has moved to `F`.
    pub next_state: State,
    /// The secret threshold was reached by this transition.
    pub terminal: bool,
    /// The step cap was hit without reaching the threshold.
    pub truncated: bool,
}

impl ExperienceTuple {
    /// Whether the critic should bootstrap from `next_state`.
    pub fn ends_episode(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Outcome of [`Environment::reset`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResetOutcome {
    pub state: State,
    /// The prior already reaches the threshold: τ = 0.
    pub finished: bool,
    /// Reward paid at τ = 0 when `finished`.
    pub reward: f64,
}

#[derive(Debug)]
pub struct Environment {
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    truth: (usize, usize),
    current: State,
    steps: usize,
    last_belief: Belief,
    terminated: bool,
    truncated: bool,
}

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.check()?;
        let prior = Belief::prior(&cfg.model);
        Ok(Self {
            rng: episode_rng(cfg.seed, 0),
            truth: (0, 0),
            current: State::Final,
            steps: 0,
            last_belief: prior,
            terminated: false,
            truncated: false,
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Starts episode `episode` on its own random stream and samples the truth from the prior.
    pub fn reset(&mut self, episode: u64) -> ResetOutcome {
        self.rng = episode_rng(self.cfg.seed, episode);
        let n_useful = self.cfg.model.spec().n_useful;
        let idx = sample_index(self.cfg.model.prior(), self.rng.random::<f64>());
        self.begin((idx / n_useful, idx % n_useful))
    }

    /// Like [`reset`](Self::reset) with a fixed truth; the random stream is
    /// advanced identically so trajectories stay comparable across truths.
    pub fn reset_with_truth(&mut self, episode: u64, secret: usize, useful: usize) -> ResetOutcome {
        self.rng = episode_rng(self.cfg.seed, episode);
        let _ = self.rng.random::<f64>();
        self.begin((secret, useful))
    }

    fn begin(&mut self, truth: (usize, usize)) -> ResetOutcome {
        self.truth = truth;
        self.steps = 0;
        self.truncated = false;
        let prior = Belief::prior(&self.cfg.model);
        self.last_belief = prior.clone();
        if prior.reaches(self.cfg.ls) {
            self.terminated = true;
            self.current = State::Final;
            let reward = match self.cfg.reward_kind {
                RewardKind::BeliefReward => prior.max_useful(),
                RewardKind::InfoReward => 0.0,
            };
            ResetOutcome {
                state: State::Belief(prior),
                finished: true,
                reward,
            }
        } else {
            self.terminated = false;
            self.current = State::Belief(prior.clone());
            ResetOutcome {
                state: State::Belief(prior),
                finished: false,
                reward: 0.0,
            }
        }
    }

    pub fn state(&self) -> &State {
        &self.current
    }

    pub fn is_done(&self) -> bool {
        self.terminated || self.truncated
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// The last belief of the episode so far (the crossing belief once terminated).
    pub fn last_belief(&self) -> &Belief {
        &self.last_belief
    }

    /// The hidden hypotheses. Used for bookkeeping only; never passed to policies.
    pub fn truth(&self) -> (usize, usize) {
        self.truth
    }

    pub fn step(&mut self, action_probs: &ActionDistribution) -> Result<ExperienceTuple> {
        let belief = match &self.current {
            State::Belief(b) if !self.is_done() => b.clone(),
            _ => return Err(Error::EpisodeFinished),
        };
        let model = &self.cfg.model;
        let spec = model.spec();
        if action_probs.len() != spec.n_actions {
            return Err(Error::ShapeMismatch {
                expected: spec.n_actions,
                actual: action_probs.len(),
            });
        }
        let action = action_probs.sample_with(self.rng.random::<f64>());
        let (s, u) = self.truth;
        let observation = sample_index(model.row(action, s, u), self.rng.random::<f64>());

        let state = State::Belief(belief);
        let next_state = apply_bayes_operator(&state, action, observation, model, self.cfg.ls)?;
        let next_belief = match &next_state {
            State::Belief(b) => b.clone(),
            State::Final => unreachable!("live belief below threshold always updates"),
        };
        if cfg!(debug_assertions) {
            cross_check_update(state.belief().unwrap(), action_probs, action, observation, model, &next_belief);
        }
        let reward = match self.cfg.reward_kind {
            RewardKind::BeliefReward => belief_reward(&next_state, self.cfg.ls),
            RewardKind::InfoReward => info_reward(&state, &next_state, self.cfg.ls, self.cfg.info_estimator)?,
        };
        self.steps += 1;
        let terminal = next_belief.reaches(self.cfg.ls);
        let truncated = !terminal && self.steps >= self.cfg.max_steps;
        self.terminated = terminal;
        self.truncated = truncated;
        self.last_belief = next_belief.clone();
        self.current = if terminal { State::Final } else { State::Belief(next_belief) };
        Ok(ExperienceTuple {
            state,
            action_probs: action_probs.clone(),
            action,
            reward,
            observation,
            next_state,
            terminal,
            truncated,
        })
    }
}

/// Recomputes the posterior with the action probability kept in numerator
/// and denominator, and compares it with the environment's update.
fn cross_check_update(
    prev: &Belief,
    probs: &ActionDistribution,
    action: usize,
    observation: usize,
    model: &ObservationModel,
    next: &Belief,
) {
    let pa = probs.probs()[action];
    let spec = model.spec();
    let mut num = Vec::with_capacity(spec.n_hypotheses());
    for s in 0..spec.n_secret {
        for u in 0..spec.n_useful {
            num.push(model.q(action, s, u, observation) * pa * prev.get(s, u));
        }
    }
    let den: f64 = num.iter().sum();
    for (x, y) in num.iter().zip(next.as_slice()) {
        debug_assert!((x / den - y).abs() < 1e-9, "belief update cross-check failed");
    }
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub true_secret: usize,
    pub true_useful: usize,
    pub steps: Vec<ExperienceTuple>,
    /// Steps until the final state; `None` when truncated.
    pub decision_time: Option<usize>,
    pub terminal_belief: Belief,
    pub truncated: bool,
    pub total_reward: f64,
}

/// Runs episode `episode` to termination or truncation.
pub fn run_episode<P: Policy + ?Sized>(env: &mut Environment, policy: &P, episode: u64) -> Result<EpisodeLog> {
    let reset = env.reset(episode);
    let (true_secret, true_useful) = env.truth();
    let mut total_reward = reset.reward;
    let mut steps = Vec::new();
    while !env.is_done() {
        let probs = match env.state() {
            State::Belief(b) => policy.act(b)?,
            State::Final => break,
        };
        let tuple = env.step(&probs)?;
        total_reward += tuple.reward;
        steps.push(tuple);
    }
    Ok(EpisodeLog {
        true_secret,
        true_useful,
        decision_time: (!env.truncated()).then_some(steps.len()),
        steps,
        terminal_belief: env.last_belief().clone(),
        truncated: env.truncated(),
        total_reward,
    })
}

/// Writes one delimiter-separated row per step:
/// `t, β(s,u) row-major..., π(a)..., action, z, reward`.
pub fn write_trace<W: Write>(log: &EpisodeLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = log.steps.first() else {
        w.write_record(["t"])?;
        w.flush()?;
        return Ok(());
    };
    let belief = first.state.belief().expect("steps start from live beliefs");
    let (n, m) = (belief.n_secret(), belief.n_useful());
    let mut header = vec!["t".to_string()];
    for s in 0..n {
        for u in 0..m {
            header.push(format!("b_{s}_{u}"));
        }
    }
    for a in 0..first.action_probs.len() {
        header.push(format!("pi_{a}"));
    }
    header.extend(["action", "z", "reward"].map(String::from));
    w.write_record(&header)?;
    for (t, step) in log.steps.iter().enumerate() {
        let mut row = vec![t.to_string()];
        let b = step.state.belief().expect("steps start from live beliefs");
        row.extend(b.as_slice().iter().map(|x| x.to_string()));
        row.extend(step.action_probs.probs().iter().map(|x| x.to_string()));
        row.push(step.action.to_string());
        row.push(step.observation.to_string());
        row.push(step.reward.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
