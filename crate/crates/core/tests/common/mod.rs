//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use privrelease_core::a2c::{actor_loss_and_grad, critic_loss_and_grad};
use privrelease_core::reward::{per_step_mi, realized_info_reward};
use privrelease_core::{
    exact_oracle, ActorHeadKind, ActorNetwork, AdamState, Belief, Critic, Mlp, ModelSpec, ObservationModel, Policy,
    RandomPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random probability vector; with `sparse`, some entries are forced to zero
/// (at least one entry always stays positive).
pub fn simplex<R: Rng>(rng: &mut R, n: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    if sparse {
        let keep = rng.random_range(0..n);
        for (i, x) in v.iter_mut().enumerate() {
            if i != keep && rng.random_bool(0.3) {
                *x = 0.0;
            }
        }
    }
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

/// A model whose every observation row is strictly positive.
pub fn random_model<R: Rng>(rng: &mut R, spec: ModelSpec) -> ObservationModel {
    let mut q = Vec::new();
    for _ in 0..spec.n_actions * spec.n_secret * spec.n_useful {
        let row = simplex(rng, spec.n_obs, false);
        let floored: Vec<f64> = row.iter().map(|x| x + 1e-3).collect();
        let t: f64 = floored.iter().sum();
        q.extend(floored.iter().map(|x| x / t));
    }
    let prior = simplex(rng, spec.n_hypotheses(), false);
    ObservationModel::new(spec, q, prior).expect("generated rows are normalized")
}

pub fn random_spec<R: Rng>(rng: &mut R, max_dim: usize, max_actions: usize, max_obs: usize) -> ModelSpec {
    ModelSpec::new(
        rng.random_range(2..=max_dim),
        rng.random_range(2..=max_dim),
        rng.random_range(1..=max_actions),
        rng.random_range(2..=max_obs),
    )
    .expect("sizes are positive")
}

pub fn random_belief<R: Rng>(rng: &mut R, n: usize, m: usize, sparse: bool) -> Belief {
    Belief::new(n, m, simplex(rng, n * m, sparse)).expect("simplex output is a belief")
}

/// `p(z | a, β)`.
pub fn predictive(belief: &Belief, a: usize, model: &ObservationModel) -> Vec<f64> {
    let spec = model.spec();
    (0..spec.n_obs)
        .map(|z| {
            let mut p = 0.0;
            for s in 0..spec.n_secret {
                for u in 0..spec.n_useful {
                    p += model.q(a, s, u, z) * belief.get(s, u);
                }
            }
            p
        })
        .collect()
}

/// Posterior computed with the action probability kept in both numerator
/// and denominator, as a reference for the cancellation property.
pub fn update_with_policy_term(belief: &Belief, pi: &[f64], a: usize, z: usize, model: &ObservationModel) -> Vec<f64> {
    let spec = model.spec();
    let mut num = vec![0.0; spec.n_hypotheses()];
    let mut den = 0.0;
    for s in 0..spec.n_secret {
        for u in 0..spec.n_useful {
            let w = pi[a] * model.q(a, s, u, z) * belief.get(s, u);
            num[s * spec.n_useful + u] = w;
            den += w;
        }
    }
    num.iter().map(|x| x / den).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Relative error used by the gradient checks; the floor keeps entries where
/// both gradients are numerically zero from dividing rounding noise by zero.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

// ---------------------------------------------------------------------------
// Belief suite

#[derive(Debug, Default, Clone, Copy)]
pub struct BeliefSuite {
    pub instances: usize,
    pub updates: usize,
    pub max_norm_err: f64,
    pub max_cancel_err: f64,
    pub max_order_err: f64,
    pub point_mass_failures: usize,
}

pub const NORM_TOL: f64 = 1e-10;
pub const CANCEL_TOL: f64 = 1e-12;
pub const ORDER_TOL: f64 = 1e-9;

impl BeliefSuite {
    pub fn passed(&self) -> bool {
        self.max_norm_err <= NORM_TOL
            && self.max_cancel_err <= CANCEL_TOL
            && self.max_order_err <= ORDER_TOL
            && self.point_mass_failures == 0
    }
}

/// One randomized instance of the belief properties, folded into `acc`.
pub fn belief_instance(seed: u64, acc: &mut BeliefSuite) {
    let mut r = rng(seed);
    let spec = random_spec(&mut r, 4, 3, 6);
    let model = random_model(&mut r, spec);
    let sparse = r.random_bool(0.3);
    let start = random_belief(&mut r, spec.n_secret, spec.n_useful, sparse);
    let steps = r.random_range(1..=6);

    let mut seq = start.clone();
    let mut path = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = r.random_range(0..spec.n_actions);
        let pz = predictive(&seq, a, &model);
        let z = privrelease_core::ActionDistribution::new(pz.iter().map(|p| p / pz.iter().sum::<f64>()).collect())
            .expect("predictive is a distribution")
            .sample_with(r.random());
        let pi = simplex(&mut r, spec.n_actions, false);
        let next = seq.bayes_update(a, z, &model).expect("z has positive evidence");
        let total: f64 = next.as_slice().iter().sum();
        acc.max_norm_err = acc.max_norm_err.max((total - 1.0).abs());
        let reference = update_with_policy_term(&seq, &pi, a, z, &model);
        acc.max_cancel_err = acc.max_cancel_err.max(max_abs_diff(next.as_slice(), &reference));
        acc.updates += 1;
        path.push((a, z));
        seq = next;
    }

    // single update with the product likelihood
    let mut prod: Vec<f64> = start.as_slice().to_vec();
    for (i, p) in prod.iter_mut().enumerate() {
        for &(a, z) in &path {
            *p *= model.q(a, i / spec.n_useful, i % spec.n_useful, z);
        }
    }
    let t: f64 = prod.iter().sum();
    prod.iter_mut().for_each(|p| *p /= t);
    acc.max_order_err = acc.max_order_err.max(max_abs_diff(seq.as_slice(), &prod));

    // the same evidence in reverse order
    let mut rev = start.clone();
    for &(a, z) in path.iter().rev() {
        rev = rev.bayes_update(a, z, &model).expect("same evidence, same support");
    }
    acc.max_order_err = acc.max_order_err.max(max_abs_diff(seq.as_slice(), rev.as_slice()));

    // a point mass never moves
    let (s0, u0) = (r.random_range(0..spec.n_secret), r.random_range(0..spec.n_useful));
    let point = Belief::point_mass(spec.n_secret, spec.n_useful, s0, u0);
    let (a, z) = path[0];
    match point.bayes_update(a, z, &model) {
        Ok(b) if b == point => {}
        _ => acc.point_mass_failures += 1,
    }
    acc.instances += 1;
}

pub fn belief_suite(instances: u64) -> BeliefSuite {
    let mut acc = BeliefSuite::default();
    for seed in 0..instances {
        belief_instance(seed, &mut acc);
    }
    acc
}

// ---------------------------------------------------------------------------
// MI suite

#[derive(Debug, Default, Clone, Copy)]
pub struct MiSuite {
    pub bound_checks: usize,
    pub bound_violations: usize,
    pub unbiased_checks: usize,
    pub max_unbiased_err: f64,
    pub chain_checks: usize,
    pub max_chain_err: f64,
}

pub const UNBIASED_TOL: f64 = 1e-12;
pub const CHAIN_TOL: f64 = 1e-9;

impl MiSuite {
    pub fn passed(&self) -> bool {
        self.bound_violations == 0 && self.max_unbiased_err <= UNBIASED_TOL && self.max_chain_err <= CHAIN_TOL
    }
}

/// `Σ_{a,z} π(a) p(z|a,β) KL(β'(u) ‖ β(u))` by exhaustive enumeration.
pub fn expected_realized_info(belief: &Belief, pi: &[f64], model: &ObservationModel) -> f64 {
    let mut total = 0.0;
    for (a, &pa) in pi.iter().enumerate() {
        for (z, &pz) in predictive(belief, a, model).iter().enumerate() {
            if pa * pz > 0.0 {
                let next = belief.bayes_update(a, z, model).expect("positive evidence");
                total += pa * pz * realized_info_reward(belief, &next).expect("posterior support within prior");
            }
        }
    }
    total
}

/// A belief-dependent policy, so the chain rule is exercised with actions
/// that react to the path.
pub struct TiltedPolicy {
    pub weights: Vec<f64>,
    pub n_actions: usize,
}

impl Policy for TiltedPolicy {
    fn act(&self, belief: &Belief) -> privrelease_core::Result<privrelease_core::ActionDistribution> {
        let n = belief.as_slice().len();
        let logits: Vec<f64> = (0..self.n_actions)
            .map(|a| belief.as_slice().iter().zip(&self.weights[a * n..(a + 1) * n]).map(|(b, w)| b * w).sum())
            .collect();
        privrelease_core::ActionDistribution::new(privrelease_core::policy::softmax(&logits))
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }
}

pub fn mi_suite(instances: u64) -> MiSuite {
    let mut acc = MiSuite::default();
    for seed in 0..instances {
        let mut r = rng(1_000_000 + seed);
        // bounds, M ≤ 4
        let spec = random_spec(&mut r, 4, 3, 5);
        let model = random_model(&mut r, spec);
        let sparse = r.random_bool(0.3);
        let b = random_belief(&mut r, spec.n_secret, spec.n_useful, sparse);
        let sparse = r.random_bool(0.3);
        let pi = simplex(&mut r, spec.n_actions, sparse);
        let mi = per_step_mi(&b, &pi, &model);
        acc.bound_checks += 1;
        if !(0.0..=(spec.n_useful as f64).ln()).contains(&mi) {
            acc.bound_violations += 1;
        }

        // unbiasedness, |A|·|Z| ≤ 12
        let n_actions = r.random_range(1..=3);
        let n_obs = r.random_range(2..=12 / n_actions);
        let spec = ModelSpec::new(r.random_range(2..=3), r.random_range(2..=3), n_actions, n_obs).unwrap();
        let model = random_model(&mut r, spec);
        let sparse = r.random_bool(0.3);
        let b = random_belief(&mut r, spec.n_secret, spec.n_useful, sparse);
        let pi = simplex(&mut r, n_actions, false);
        let err = (expected_realized_info(&b, &pi, &model) - per_step_mi(&b, &pi, &model)).abs();
        acc.max_unbiased_err = acc.max_unbiased_err.max(err);
        acc.unbiased_checks += 1;
    }
    // chain rule on N = M = 2, horizons 1..=4
    for seed in 0..instances.min(64) {
        let mut r = rng(2_000_000 + seed);
        let spec = ModelSpec::new(2, 2, r.random_range(1..=2), r.random_range(2..=3)).unwrap();
        let model = random_model(&mut r, spec);
        let horizon = r.random_range(1..=4);
        let ls = r.random_range(0.55..0.95);
        let err = if seed % 2 == 0 {
            let pi = RandomPolicy::new(simplex(&mut r, spec.n_actions, false)).unwrap();
            chain_gap(&model, &pi, ls, horizon)
        } else {
            let tilted = TiltedPolicy {
                weights: (0..spec.n_actions * 4).map(|_| r.random_range(-3.0..3.0)).collect(),
                n_actions: spec.n_actions,
            };
            chain_gap(&model, &tilted, ls, horizon)
        };
        acc.max_chain_err = acc.max_chain_err.max(err);
        acc.chain_checks += 1;
    }
    acc
}

fn chain_gap<P: Policy>(model: &ObservationModel, policy: &P, ls: f64, horizon: usize) -> f64 {
    let o = exact_oracle(model, policy, ls, horizon).expect("tiny instance fits the budget");
    (o.exact_joint_mi - o.chain_rule_mi).abs()
}

// ---------------------------------------------------------------------------
// Gradient suite

#[derive(Debug, Default, Clone, Copy)]
pub struct GradSuite {
    pub draws: usize,
    pub max_critic_err: f64,
    pub max_actor_softmax_err: f64,
    pub max_actor_dirichlet_err: f64,
    pub max_adam_err: f64,
}

pub const GRAD_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
pub const ADAM_TOL: f64 = 1e-3;

impl GradSuite {
    pub fn passed(&self) -> bool {
        self.max_critic_err < GRAD_TOL
            && self.max_actor_softmax_err < GRAD_TOL
            && self.max_actor_dirichlet_err < GRAD_TOL
            && self.max_adam_err <= ADAM_TOL
    }
}

/// A net with every parameter, biases included, drawn from U(-1, 1). Zero
/// biases would put pre-activations exactly on the ReLU kink whenever a whole
/// layer is inactive, where a central difference is not a derivative.
pub fn random_net<R: Rng>(r: &mut R, sizes: &[usize]) -> Mlp {
    let mut net = Mlp::zeros(sizes).unwrap();
    net.params_mut().iter_mut().for_each(|p| *p = r.random_range(-1.0..1.0));
    net
}

fn central_difference(params: &[f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = params.to_vec();
    p[i] = params[i] + FD_STEP;
    let up = f(&p);
    p[i] = params[i] - FD_STEP;
    let down = f(&p);
    (up - down) / (2.0 * FD_STEP)
}

/// Max relative error of the critic's semi-gradient on a 4-2-2-1 net.
pub fn critic_grad_err<R: Rng>(r: &mut R) -> f64 {
    let net = random_net(r, &[4, 2, 2, 1]);
    let critic = Critic::new(net, 1.0 + r.random::<f64>());
    let belief = random_belief(r, 2, 2, false);
    let target = r.random_range(-1.0..2.0);
    let (_, _, grad) = critic_loss_and_grad(&critic, &belief, target).unwrap();
    let sizes = critic.net.sizes().to_vec();
    (0..grad.len())
        .map(|i| {
            let numeric = central_difference(critic.net.params(), i, |p| {
                let c = Critic::new(Mlp::from_parts(sizes.clone(), p.to_vec()).unwrap(), critic.v_max);
                let v = c.value(&belief).unwrap();
                (target - v).powi(2)
            });
            rel_err(grad[i], numeric)
        })
        .fold(0.0, f64::max)
}

/// Max relative error of the actor gradient on a 4-2-2-3 net.
pub fn actor_grad_err<R: Rng>(r: &mut R, head: ActorHeadKind, entropy_coeff: f64) -> f64 {
    let net = random_net(r, &[4, 2, 2, 3]);
    let actor = ActorNetwork::new(net, head);
    let belief = random_belief(r, 2, 2, false);
    let action = r.random_range(0..3);
    let delta = r.random_range(-2.0..2.0);
    let (_, grad) = actor_loss_and_grad(&actor, &belief, action, delta, entropy_coeff).unwrap();
    let sizes = actor.net.sizes().to_vec();
    (0..grad.len())
        .map(|i| {
            let numeric = central_difference(actor.net.params(), i, |p| {
                let a = ActorNetwork::new(Mlp::from_parts(sizes.clone(), p.to_vec()).unwrap(), head);
                let fwd = a.forward(&belief).unwrap();
                a.loss(&fwd, action, delta, entropy_coeff)
            });
            rel_err(grad[i], numeric)
        })
        .fold(0.0, f64::max)
}

/// Relative deviation of the first ADAM step's magnitude from the learning rate.
pub fn adam_first_step_err<R: Rng>(r: &mut R) -> f64 {
    let n = 16;
    let lr = 10f64.powf(r.random_range(-5.0..-2.0));
    let mut params: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let before = params.clone();
    let grads: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = r.random_range(1e-3..10.0);
            if r.random_bool(0.5) {
                g
            } else {
                -g
            }
        })
        .collect();
    let mut adam = AdamState::new(n);
    adam.step(&mut params, &grads, lr);
    params
        .iter()
        .zip(&before)
        .map(|(p, b)| ((p - b).abs() - lr).abs() / lr)
        .fold(0.0, f64::max)
}

pub fn grad_suite(draws: usize) -> GradSuite {
    let mut r = rng(3_000_000);
    let mut acc = GradSuite::default();
    for i in 0..draws {
        let c = if i % 2 == 0 { 0.0 } else { 0.05 };
        acc.max_critic_err = acc.max_critic_err.max(critic_grad_err(&mut r));
        acc.max_actor_softmax_err = acc
            .max_actor_softmax_err
            .max(actor_grad_err(&mut r, ActorHeadKind::SoftmaxDirect, c));
        acc.max_actor_dirichlet_err = acc
            .max_actor_dirichlet_err
            .max(actor_grad_err(&mut r, ActorHeadKind::DirichletCompound, c));
        acc.max_adam_err = acc.max_adam_err.max(adam_first_step_err(&mut r));
        acc.draws += 1;
    }
    acc
}
