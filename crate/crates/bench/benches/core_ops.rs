use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use privrelease_core::a2c::TrainConfig;
use privrelease_core::eval::env_for;
use privrelease_core::reward::per_step_mi;
use privrelease_core::{
    exact_oracle, generate_gaussian_model, run_episode, tiny_model, Agent, AdamState, Belief, Environment,
    GeneratorSpec, ModelSpec, ObservationModel, Policy, RandomPolicy,
};

fn paper_model() -> ObservationModel {
    let spec = ModelSpec::new(3, 3, 3, 21).unwrap();
    generate_gaussian_model(&GeneratorSpec::new(spec, 0)).unwrap()
}

fn belief_ops(c: &mut Criterion) {
    let model = paper_model();
    let b = Belief::prior(&model);
    c.bench_function("bayes_update 3x3x21", |bench| {
        bench.iter(|| black_box(&b).bayes_update(1, 7, &model).unwrap())
    });
    c.bench_function("per_step_mi 3x3x3x21", |bench| {
        bench.iter(|| per_step_mi(black_box(&b), &[0.3, 0.6, 0.1], &model))
    });
}

fn learner_ops(c: &mut Criterion) {
    let model = Arc::new(paper_model());
    let cfg = TrainConfig::default();
    let agent = Agent::new(9, 3, 3, &cfg).unwrap();
    let mut env = Environment::new(env_for(model, 0.8, 0, 5000)).unwrap();
    env.reset(0);
    let dist = agent.actor.act(env.last_belief()).unwrap();
    let tuple = env.step(&dist).unwrap();

    let b = tuple.state.belief().unwrap().clone();
    c.bench_function("actor forward 9-64-64-3", |bench| bench.iter(|| agent.actor.act(black_box(&b)).unwrap()));
    // fresh agent per batch: replaying one transition forever drives the
    // optimizer state into subnormal range and measures that instead
    c.bench_function("agent learn (critic + actor step)", |bench| {
        bench.iter_batched_ref(
            || agent.clone(),
            |a| a.learn(black_box(&tuple), &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });

    let n = agent.actor.net.n_params();
    let mut params = vec![0.1; n];
    let grads = vec![0.01; n];
    let mut adam = AdamState::new(n);
    c.bench_function("adam step 5k params", |bench| {
        bench.iter(|| adam.step(black_box(&mut params), black_box(&grads), 1e-3))
    });
}

fn episode_ops(c: &mut Criterion) {
    let model = Arc::new(paper_model());
    let mut env = Environment::new(env_for(model, 0.8, 0, 5000)).unwrap();
    let policy = RandomPolicy::uniform(3);
    let mut episode = 0;
    c.bench_function("random-policy episode ls=0.8", |bench| {
        bench.iter(|| {
            episode += 1;
            run_episode(&mut env, &policy, episode).unwrap()
        })
    });
    let tiny = tiny_model();
    let uniform = RandomPolicy::uniform(2);
    c.bench_function("exact oracle tiny horizon 4", |bench| {
        bench.iter(|| exact_oracle(&tiny, &uniform, 0.8, 4).unwrap())
    });
}

criterion_group!(benches, belief_ops, learner_ops, episode_ops);
criterion_main!(benches);
