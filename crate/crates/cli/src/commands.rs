use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use privrelease_core::a2c::{train_with, write_train_log};
use privrelease_core::env::{run_episode, write_trace, Environment};
use privrelease_core::eval::{self, write_summary, EvalReport, OracleResult};
use privrelease_core::{
    exact_oracle, generate_gaussian_model, tiny_model, ActorHeadKind, EnvConfig, GeneratorSpec, InfoEstimator, ModelSpec,
    ObservationModel, Policy, RandomPolicy, RewardKind, StoredPolicy, TrainConfig,
};

use crate::args::{parse_list, BaselineArgs, Command, EvalArgs, GenModelArgs, OracleArgs, SweepArgs, TrainArgs};
use crate::defaults as d;
use crate::CliError;

pub fn run(command: Command, config_file: Option<&Path>) -> Result<(), CliError> {
    match command {
        Command::GenModel(a) => gen_model(a, config_file),
        Command::Baseline(a) => baseline(a, config_file),
        Command::Train(a) => train(a, config_file),
        Command::Eval(a) => eval_cmd(a, config_file),
        Command::Sweep(a) => sweep(a, config_file),
        Command::Oracle(a) => oracle(a, config_file),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn provenance<T: Serialize>(command: &str, resolved: &T, config_file: Option<&Path>) -> serde_json::Value {
    json!({
        "tool": "privrelease",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_file": config_file.map(|p| p.display().to_string()),
        "resolved": resolved,
    })
}

fn load_model(path: &Path) -> Result<Arc<ObservationModel>, CliError> {
    Ok(Arc::new(ObservationModel::load(path)?))
}

fn probs_policy(text: &str) -> Result<RandomPolicy, CliError> {
    let probs: Vec<f64> = parse_list("probs", text)?;
    RandomPolicy::new(probs).map_err(|e| CliError::Config(format!("--probs: {e}")))
}

fn check_actions(policy: &dyn Policy, model: &ObservationModel) -> Result<(), CliError> {
    let expected = model.spec().n_actions;
    if policy.n_actions() != expected {
        return Err(CliError::Config(format!(
            "policy has {} actions, model has {expected}",
            policy.n_actions()
        )));
    }
    Ok(())
}

fn check_policy_input(policy: &StoredPolicy, model: &ObservationModel) -> Result<(), CliError> {
    if let StoredPolicy::Actor(actor) = policy {
        if actor.net.input_dim() != model.spec().n_hypotheses() {
            return Err(CliError::Config(format!(
                "policy expects a {}-dimensional belief, model has {}",
                actor.net.input_dim(),
                model.spec().n_hypotheses()
            )));
        }
    }
    check_actions(policy, model)
}

fn label_for_file(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn label_for_probs(policy: &RandomPolicy) -> String {
    let parts: Vec<String> = policy.probs().iter().map(|p| format!("{p:.4}")).collect();
    format!("fixed[{}]", parts.join("/"))
}

fn write_csv(reports: &[EvalReport], out: Option<&Path>, prov: &serde_json::Value) -> Result<(), CliError> {
    let comment = format!("provenance: {prov}");
    match out {
        Some(path) => write_summary(reports, fs::File::create(path)?, Some(&comment))?,
        None => write_summary(reports, io::stdout().lock(), Some(&comment))?,
    }
    Ok(())
}

#[derive(Serialize)]
struct GenModelResolved {
    generator: GeneratorSpec,
    out: PathBuf,
}

fn gen_model(a: GenModelArgs, config_file: Option<&Path>) -> Result<(), CliError> {
    let spec = ModelSpec::new(
        a.n.unwrap_or(d::N_SECRET),
        a.m.unwrap_or(d::N_USEFUL),
        a.actions.unwrap_or(d::N_ACTIONS),
        a.obs.unwrap_or(d::N_OBS),
    )?;
    let generator = GeneratorSpec {
        spec,
        sigma_low: a.sigma_low.unwrap_or(d::SIGMA_LOW),
        sigma_high: a.sigma_high.unwrap_or(d::SIGMA_HIGH),
        grid_low: a.grid_low.unwrap_or(d::GRID_LOW),
        grid_high: a.grid_high.unwrap_or(d::GRID_HIGH),
        seed: a.seed.unwrap_or(d::SEED),
    };
    generator.check()?;
    let out = required(a.out, "out")?;
    let model = generate_gaussian_model(&generator)?;
    let resolved = GenModelResolved { generator, out: out.clone() };
    model.save_with_provenance(&out, Some(provenance("gen-model", &resolved, config_file)))?;
    println!("wrote {} ({}x{}x{}x{})", out.display(), spec.n_actions, spec.n_secret, spec.n_useful, spec.n_obs);
    Ok(())
}

#[derive(Serialize)]
struct BaselineResolved {
    probs: Vec<f64>,
    seed: u64,
    out: PathBuf,
}

fn baseline(a: BaselineArgs, config_file: Option<&Path>) -> Result<(), CliError> {
    let policy = probs_policy(&required(a.probs, "probs")?)?;
    let out = required(a.out, "out")?;
    let resolved = BaselineResolved {
        probs: policy.probs().to_vec(),
        seed: a.seed.unwrap_or(d::SEED),
        out: out.clone(),
    };
    StoredPolicy::Random(policy).save(&out, Some(provenance("baseline", &resolved, config_file)))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn parse_reward(text: &str) -> Result<RewardKind, CliError> {
    match text {
        "belief" => Ok(RewardKind::BeliefReward),
        "info" | "mi" => Ok(RewardKind::InfoReward),
        other => Err(CliError::Config(format!("--reward must be 'belief' or 'info', got '{other}'"))),
    }
}

fn parse_estimator(text: &str) -> Result<InfoEstimator, CliError> {
    match text {
        "kl" => Ok(InfoEstimator::KlDivergence),
        "entropy" => Ok(InfoEstimator::EntropyReduction),
        other => Err(CliError::Config(format!("--info-estimator must be 'kl' or 'entropy', got '{other}'"))),
    }
}

fn parse_head(text: &str) -> Result<ActorHeadKind, CliError> {
    match text {
        "softmax" => Ok(ActorHeadKind::SoftmaxDirect),
        "dirichlet" => Ok(ActorHeadKind::DirichletCompound),
        other => Err(CliError::Config(format!("--head must be 'softmax' or 'dirichlet', got '{other}'"))),
    }
}

#[derive(Serialize)]
struct TrainResolved {
    model: PathBuf,
    ls: f64,
    reward: RewardKind,
    info_estimator: InfoEstimator,
    max_steps: usize,
    train: TrainConfig,
    out: PathBuf,
    log: Option<PathBuf>,
}

fn train(a: TrainArgs, config_file: Option<&Path>) -> Result<(), CliError> {
    let model_path = required(a.model, "model")?;
    let out = required(a.out, "out")?;
    let hidden = match &a.hidden {
        Some(text) => parse_list("hidden", text)?,
        None => d::HIDDEN.to_vec(),
    };
    let cfg = TrainConfig {
        gamma: a.gamma.unwrap_or(d::GAMMA),
        lr_actor: a.lr_actor.unwrap_or(d::LR_ACTOR),
        lr_critic: a.lr_critic.unwrap_or(d::LR_CRITIC),
        episodes: a.episodes.unwrap_or(d::TRAIN_EPISODES),
        v_max: a.v_max,
        seed: a.seed.unwrap_or(d::SEED),
        head: a.head.as_deref().map(parse_head).transpose()?.unwrap_or_default(),
        entropy_coeff: a.entropy_coeff.unwrap_or(d::ENTROPY_COEFF),
        hidden,
    };
    cfg.check()?;
    let model = load_model(&model_path)?;
    let mut env_cfg = EnvConfig::new(model, a.ls.unwrap_or(d::LS))
        .with_reward(a.reward.as_deref().map(parse_reward).transpose()?.unwrap_or_default())
        .with_max_steps(a.max_steps.unwrap_or(d::MAX_STEPS))
        .with_seed(cfg.seed);
    env_cfg.info_estimator = a.info_estimator.as_deref().map(parse_estimator).transpose()?.unwrap_or_default();
    env_cfg.check()?;
    let resolved = TrainResolved {
        model: model_path,
        ls: env_cfg.ls,
        reward: env_cfg.reward_kind,
        info_estimator: env_cfg.info_estimator,
        max_steps: env_cfg.max_steps,
        train: cfg.clone(),
        out: out.clone(),
        log: a.log.clone(),
    };
    let prov = provenance("train", &resolved, config_file);

    let report_every = (cfg.episodes / 20).max(1);
    let (mut ret, mut tau, mut n) = (0.0, 0.0, 0usize);
    let outcome = train_with(&env_cfg, &cfg, |s| {
        ret += s.ret;
        tau += s.tau as f64;
        n += 1;
        if n == report_every {
            eprintln!(
                "episode {:>7}: mean return {:.4}, mean tau {:.1}",
                s.episode + 1,
                ret / n as f64,
                tau / n as f64
            );
            (ret, tau, n) = (0.0, 0.0, 0);
        }
    })?;
    StoredPolicy::Actor(outcome.actor).save(&out, Some(prov.clone()))?;
    if let Some(path) = &a.log {
        let mut file = fs::File::create(path)?;
        writeln!(file, "# provenance: {prov}")?;
        write_train_log(&outcome.log, file)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalResolved {
    model: PathBuf,
    policy: String,
    ls: f64,
    episodes: usize,
    max_steps: usize,
    seed: u64,
}

fn eval_cmd(a: EvalArgs, config_file: Option<&Path>) -> Result<(), CliError> {
    let model_path = required(a.model, "model")?;
    let (policy, default_name) = match (&a.policy, &a.probs) {
        (Some(path), None) => (StoredPolicy::load(path)?, label_for_file(path)),
        (None, Some(text)) => {
            let p = probs_policy(text)?;
            let name = label_for_probs(&p);
            (StoredPolicy::Random(p), name)
        }
        _ => return Err(CliError::Config("exactly one of --policy or --probs is required".into())),
    };
    let episodes = a.episodes.unwrap_or(d::EVAL_EPISODES);
    let env_cfg = eval::env_for(
        load_model(&model_path)?,
        a.ls.unwrap_or(d::LS),
        a.seed.unwrap_or(d::SEED),
        a.max_steps.unwrap_or(d::MAX_STEPS),
    );
    env_cfg.check()?;
    check_policy_input(&policy, &env_cfg.model)?;
    let name = a.name.unwrap_or(default_name);
    let resolved = EvalResolved {
        model: model_path,
        policy: a.policy.map(|p| p.display().to_string()).or(a.probs).unwrap_or_default(),
        ls: env_cfg.ls,
        episodes,
        max_steps: env_cfg.max_steps,
        seed: env_cfg.seed,
    };
    let prov = provenance("eval", &resolved, config_file);
    let mut report = privrelease_core::evaluate(&env_cfg, &policy, episodes)?;
    report.policy = name;
    if let Some(path) = &a.trace {
        let log = run_episode(&mut Environment::new(env_cfg.clone())?, &policy, 0)?;
        let mut file = fs::File::create(path)?;
        writeln!(file, "# provenance: {prov}")?;
        write_trace(&log, file)?;
    }
    write_csv(std::slice::from_ref(&report), a.out.as_deref(), &prov)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepResolved {
    model: PathBuf,
    policies: Vec<String>,
    ls: Vec<f64>,
    episodes: usize,
    max_steps: usize,
    seed: u64,
}

fn sweep(a: SweepArgs, config_file: Option<&Path>) -> Result<(), CliError> {
    let model_path = required(a.model, "model")?;
    let model = load_model(&model_path)?;
    let mut named: Vec<(String, StoredPolicy)> = Vec::new();
    for path in &a.policies {
        named.push((label_for_file(path), StoredPolicy::load(path)?));
    }
    for text in &a.probs {
        let p = probs_policy(text)?;
        named.push((label_for_probs(&p), StoredPolicy::Random(p)));
    }
    if named.is_empty() {
        return Err(CliError::Config("sweep needs at least one --policy or --probs".into()));
    }
    for (_, p) in &named {
        check_policy_input(p, &model)?;
    }
    let ls_list: Vec<f64> = match &a.ls {
        Some(text) => parse_list("ls", text)?,
        None => d::SWEEP_LS.to_vec(),
    };
    let episodes = a.episodes.unwrap_or(d::EVAL_EPISODES);
    let base = eval::env_for(model, ls_list[0], a.seed.unwrap_or(d::SEED), a.max_steps.unwrap_or(d::MAX_STEPS));
    for &ls in &ls_list {
        EnvConfig { ls, ..base.clone() }.check()?;
    }
    let resolved = SweepResolved {
        model: model_path,
        policies: named.iter().map(|(n, _)| n.clone()).collect(),
        ls: ls_list.clone(),
        episodes,
        max_steps: base.max_steps,
        seed: base.seed,
    };
    let prov = provenance("sweep", &resolved, config_file);
    let refs: Vec<(&str, &dyn Policy)> = named.iter().map(|(n, p)| (n.as_str(), p as &dyn Policy)).collect();
    let reports = privrelease_core::sweep(&base, &refs, &ls_list, episodes)?;
    write_csv(&reports, a.out.as_deref(), &prov)
}

#[derive(Serialize)]
struct OracleResolved {
    model: Option<PathBuf>,
    policy: String,
    ls: f64,
    horizon: usize,
    episodes: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Comparison {
    metric: &'static str,
    exact: f64,
    estimate: f64,
    standard_error: f64,
    z_score: f64,
    agrees: bool,
}

fn compare(metric: &'static str, exact: f64, estimate: f64, se: f64) -> Comparison {
    let diff = (estimate - exact).abs();
    let z_score = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    Comparison {
        metric,
        exact,
        estimate,
        standard_error: se,
        z_score,
        agrees: diff <= d::ORACLE_SE_TOLERANCE * se || diff < 1e-12,
    }
}

fn oracle(a: OracleArgs, config_file: Option<&Path>) -> Result<(), CliError> {
    let model = match &a.model {
        Some(path) => load_model(path)?,
        None => Arc::new(tiny_model()),
    };
    let policy = match (&a.policy, &a.probs) {
        (Some(path), None) => StoredPolicy::load(path)?,
        (None, Some(text)) => StoredPolicy::Random(probs_policy(text)?),
        (None, None) => StoredPolicy::Random(RandomPolicy::uniform(model.spec().n_actions)),
        _ => return Err(CliError::Config("--policy and --probs are mutually exclusive".into())),
    };
    check_policy_input(&policy, &model)?;
    let ls = a.ls.unwrap_or(d::LS);
    let horizon = a.horizon.unwrap_or(d::HORIZON);
    let episodes = a.episodes.unwrap_or(d::ORACLE_EPISODES);
    let env_cfg = eval::env_for(model.clone(), ls, a.seed.unwrap_or(d::SEED), horizon.max(1));
    env_cfg.check()?;
    let resolved = OracleResolved {
        model: a.model.clone(),
        policy: a.policy.as_ref().map(|p| p.display().to_string()).or(a.probs.clone()).unwrap_or_else(|| "uniform".into()),
        ls,
        horizon,
        episodes,
        seed: env_cfg.seed,
    };
    let exact: OracleResult = exact_oracle(&model, &policy, ls, horizon)?;
    let mc = privrelease_core::evaluate(&env_cfg, &policy, episodes)?;
    let checks = vec![
        compare("conf_true_u", exact.expected_conf_true_u, mc.conf_true_u, mc.conf_true_u_se),
        compare("conf_max_u", exact.expected_conf_max_u, mc.conf_max_u, mc.conf_max_u_se),
        compare("mi_nats", exact.exact_joint_mi, mc.mi_nats, mc.mi_se),
        compare("tau_mean", exact.expected_tau, mc.tau_mean, mc.tau_se),
    ];
    let chain_gap = (exact.exact_joint_mi - exact.chain_rule_mi).abs();
    for c in &checks {
        println!(
            "{:<12} exact {:>12.9}  monte-carlo {:>12.9}  se {:>10.3e}  z {:>6.2}  {}",
            c.metric,
            c.exact,
            c.estimate,
            c.standard_error,
            c.z_score,
            if c.agrees { "ok" } else { "DISAGREE" }
        );
    }
    println!("chain-rule gap {chain_gap:.3e}");
    let all_agree = checks.iter().all(|c| c.agrees) && chain_gap < 1e-9;
    println!("verdict: {}", if all_agree { "agree" } else { "disagree" });
    if let Some(path) = &a.out {
        let doc = json!({
            "provenance": provenance("oracle", &resolved, config_file),
            "exact": exact,
            "chain_rule_gap": chain_gap,
            "comparisons": checks,
            "agree": all_agree,
        });
        fs::write(path, serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))? + "\n")?;
    }
    if all_agree {
        Ok(())
    } else {
        Err(CliError::Disagreement("Monte Carlo estimates fall outside 3 standard errors".into()))
    }
}
