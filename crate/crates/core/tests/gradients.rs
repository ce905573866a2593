mod common;

use common::*;
use privrelease_core::a2c::{critic_update, td_error, TrainConfig};
use privrelease_core::env::ExperienceTuple;
use privrelease_core::{ActionDistribution, ActorHeadKind, AdamState, Belief, Critic, Mlp, State};

#[test]
fn critic_gradient_matches_finite_differences() {
    let mut r = rng(11);
    for draw in 0..25 {
        let err = critic_grad_err(&mut r);
        assert!(err < GRAD_TOL, "draw {draw}: relative error {err}");
    }
}

#[test]
fn actor_gradients_match_finite_differences_for_both_heads() {
    let mut r = rng(12);
    for head in [ActorHeadKind::SoftmaxDirect, ActorHeadKind::DirichletCompound] {
        for entropy_coeff in [0.0, 0.1] {
            for draw in 0..25 {
                let err = actor_grad_err(&mut r, head, entropy_coeff);
                assert!(err < GRAD_TOL, "{head:?}, c={entropy_coeff}, draw {draw}: relative error {err}");
            }
        }
    }
}

#[test]
fn adam_first_step_has_magnitude_lr() {
    let mut r = rng(13);
    for _ in 0..25 {
        let err = adam_first_step_err(&mut r);
        assert!(err <= ADAM_TOL, "first step off by {err}");
    }
}

fn tuple(state: Belief, next: Belief, reward: f64) -> ExperienceTuple {
    ExperienceTuple {
        state: State::Belief(state),
        action_probs: ActionDistribution::uniform(2),
        action: 0,
        reward,
        observation: 0,
        next_state: State::Belief(next),
        terminal: false,
        truncated: false,
    }
}

#[test]
fn critic_step_holds_the_target_fixed() {
    // The update must equal a gradient step on (target − V(x))² with the
    // target computed from the pre-update critic. Recompute it by hand and
    // compare; a full gradient would also move V(x') and give a different step.
    let mut r = rng(14);
    let cfg = TrainConfig::default();
    for _ in 0..20 {
        let critic = Critic::new(Mlp::init(&[4, 3, 1], 1.0, &mut r).unwrap(), 1.0);
        let x = random_belief(&mut r, 2, 2, false);
        let x_next = random_belief(&mut r, 2, 2, false);
        let t = tuple(x.clone(), x_next.clone(), 0.3);

        let mut updated = critic.clone();
        let mut adam = AdamState::new(critic.net.n_params());
        let step = critic_update(&mut updated, &mut adam, &t, &cfg).unwrap();

        let v = critic.value(&x).unwrap();
        let v_next = critic.value(&x_next).unwrap();
        assert!((step.delta - td_error(0.3, cfg.gamma, v_next, v)).abs() < 1e-15);

        let target = 0.3 + cfg.gamma * v_next;
        let (_, _, grad) = privrelease_core::a2c::critic_loss_and_grad(&critic, &x, target).unwrap();
        let mut expected = critic.clone();
        AdamState::new(critic.net.n_params()).step(expected.net.params_mut(), &grad, cfg.lr_critic);
        assert_eq!(updated.net.params(), expected.net.params());

        // A different next belief with the reward adjusted to give the same
        // target must produce the same step: V(x') enters only through the target.
        let other = random_belief(&mut r, 2, 2, false);
        let reward = target - cfg.gamma * critic.value(&other).unwrap();
        let mut moved = critic.clone();
        let mut adam = AdamState::new(critic.net.n_params());
        critic_update(&mut moved, &mut adam, &tuple(x.clone(), other, reward), &cfg).unwrap();
        let max_gap = max_abs_diff(moved.net.params(), updated.net.params());
        assert!(max_gap < 1e-12, "step moved by {max_gap}");
    }
}

#[test]
fn terminal_transitions_bootstrap_from_zero() {
    let mut r = rng(15);
    let critic = Critic::new(Mlp::init(&[4, 3, 1], 1.0, &mut r).unwrap(), 1.0);
    let x = random_belief(&mut r, 2, 2, false);
    let mut t = tuple(x.clone(), random_belief(&mut r, 2, 2, false), 0.7);
    t.truncated = true;
    assert_eq!(privrelease_core::a2c::bootstrap_value(&critic, &t).unwrap(), 0.0);
    t.truncated = false;
    t.terminal = true;
    t.next_state = State::Final;
    assert_eq!(privrelease_core::a2c::bootstrap_value(&critic, &t).unwrap(), 0.0);
}

#[test]
fn critic_output_is_bounded() {
    let mut r = rng(16);
    let mut net = Mlp::init(&[4, 8, 1], 1.0, &mut r).unwrap();
    net.params_mut().iter_mut().for_each(|p| *p *= 1e3);
    let critic = Critic::new(net, 1.5);
    for _ in 0..100 {
        let v = critic.value(&random_belief(&mut r, 2, 2, false)).unwrap();
        assert!(v.abs() <= 1.5);
    }
}
