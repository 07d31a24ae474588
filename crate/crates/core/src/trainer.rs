//! The outer adversarial loop: alternate K episodes of actor-critic
//! training under the current damage configuration with a greedy adversary
//! pass that picks the next one.
//!
//! The replay buffer is created once and persists across iterations, so
//! experience gathered under every damage case keeps training the shared
//! policy. Baseline mode skips the adversary and trains undamaged
//! throughout.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    evaluate_policy, greedy_search, AdversaryConfig, AdversaryError, RolloutEvaluator,
};
use crate::checkpoint::{self, CheckpointError, SaveContext, TrainerRngs};
use crate::env::{EnvId, Environment};
use crate::envs::build_env;
use crate::fault::{make_q, AngleSource, DamageCase};
use crate::rng::{derive, tags, Pcg32};
use crate::sac::{Learner, Policy, SacConfig, SacError};

#[derive(Debug, thiserror::Error)]
pub enum TrainerError {
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("run directory {0} already contains a ledger; refusing to overwrite")]
    RunExists(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Fault(#[from] crate::fault::FaultError),
}

fn io_err(path: &Path, source: std::io::Error) -> TrainerError {
    TrainerError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Adversarial training: the damage case is re-chosen every iteration.
    Rsac,
    /// Plain SAC trained undamaged throughout; the comparison baseline.
    SacBaseline,
}

impl TrainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainMode::Rsac => "rsac",
            TrainMode::SacBaseline => "sac-baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialQ {
    /// A single uniformly drawn damaged joint.
    #[default]
    RandomSet,
    Undamaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub env: EnvId,
    pub mode: TrainMode,
    pub seed: u64,
    /// Outer adversarial iterations.
    pub n_iter: usize,
    /// K: training episodes per iteration.
    pub episodes_per_iter: usize,
    pub initial_q: InitialQ,
    /// When false, the policy never sees q flags (convergence ablation).
    pub q_visible: bool,
    /// Ablation: drop the replay buffer whenever the damage case changes.
    pub clear_buffer_on_switch: bool,
    /// Probability that a training episode runs undamaged instead of under
    /// the current case (ablation; 0 = faithful).
    pub undamaged_mixin: f64,
    /// Root seed for adversary evaluation episodes; defaults to `seed`.
    /// Kept separate so evaluation reseeding cannot perturb training.
    pub eval_seed: Option<u64>,
    pub adversary: AdversaryConfig,
    pub sac: SacConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            env: EnvId::Claw,
            mode: TrainMode::Rsac,
            seed: 0,
            n_iter: 20,
            episodes_per_iter: 100,
            initial_q: InitialQ::RandomSet,
            q_visible: true,
            clear_buffer_on_switch: false,
            undamaged_mixin: 0.0,
            eval_seed: None,
            adversary: AdversaryConfig::default(),
            sac: SacConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_iter == 0 || self.episodes_per_iter == 0 {
            return Err("n_iter and episodes_per_iter must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.undamaged_mixin) {
            return Err("undamaged_mixin must be in [0, 1]".into());
        }
        if self.adversary.eval_episodes == 0 {
            return Err("adversary.eval_episodes must be at least 1".into());
        }
        self.sac.validate()
    }

    /// Canonical id used in checkpoint metadata and reports.
    pub fn policy_id(&self) -> String {
        format!(
            "{}-{}{}-s{}",
            self.env.as_str(),
            self.mode.as_str(),
            if self.q_visible { "" } else { "-blind" },
            self.seed
        )
    }
}

/// One ledger record per outer iteration. Deterministic content only; wall
/// clock times go to the separate timings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Damage case trained under during this iteration.
    pub case: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    /// Cumulative environment steps after this iteration.
    pub env_steps: u64,
    pub updates: u64,
    /// Adversary's choice for the next iteration (empty for the baseline).
    pub next_case: String,
    pub checkpoint_file: String,
    pub adversary_trace_file: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunLedger {
    pub records: Vec<IterationRecord>,
    pub wall_clock_ms: Vec<u128>,
}

/// File layout inside one run directory.
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        RunPaths {
            root: root.to_path_buf(),
        }
    }
    pub fn ledger(&self) -> PathBuf {
        self.root.join("ledger.jsonl")
    }
    pub fn episodes_log(&self) -> PathBuf {
        self.root.join("episodes.log")
    }
    pub fn timings(&self) -> PathBuf {
        self.root.join("timings.log")
    }
    pub fn config_copy(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn resume(&self) -> PathBuf {
        self.root.join("resume.rsnap")
    }
    pub fn final_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints").join("final.rsnap")
    }
    pub fn iter_checkpoint(&self, iter: usize) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(format!("iter_{iter:04}.rsnap"))
    }
    pub fn adversary_trace(&self, iter: usize) -> PathBuf {
        self.root
            .join("adversary")
            .join(format!("iter_{iter:04}.trace"))
    }
}

fn append_line(path: &Path, line: &str) -> Result<(), TrainerError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    writeln!(f, "{line}").map_err(|e| io_err(path, e))
}

fn draw_initial_case(config: &TrainerConfig, n_joints: usize) -> DamageCase {
    match (config.mode, config.initial_q) {
        (TrainMode::SacBaseline, _) => DamageCase::empty(),
        (TrainMode::Rsac, InitialQ::Undamaged) => DamageCase::empty(),
        (TrainMode::Rsac, InitialQ::RandomSet) => {
            let mut rng = Pcg32::new(derive(config.seed, tags::INITIAL_Q), 41);
            DamageCase::single(rng.below(n_joints))
        }
    }
}

/// Train from scratch into `run_root`.
pub fn train(config: &TrainerConfig, run_root: &Path) -> Result<RunLedger, TrainerError> {
    config.validate().map_err(TrainerError::Config)?;
    let paths = RunPaths::new(run_root);
    if paths.ledger().exists() {
        return Err(TrainerError::RunExists(run_root.to_path_buf()));
    }
    std::fs::create_dir_all(run_root).map_err(|e| io_err(run_root, e))?;

    let mut env = build_env(config.env);
    let spec = env.spec().clone();
    let learner = Learner::new(&spec, config.sac.clone(), config.seed, config.q_visible);
    let rngs = TrainerRngs {
        explore: Pcg32::new(derive(config.seed, tags::EXPLORE), 43),
        env_seed: Pcg32::new(derive(config.seed, tags::ENV_SEED), 47),
        angles: Pcg32::new(derive(config.seed, tags::FROZEN_ANGLES), 53),
        mixin: Pcg32::new(derive(config.seed, tags::MIXIN), 59),
    };
    let current = draw_initial_case(config, spec.n_joints);
    run_loop(config, paths, env.as_mut(), learner, rngs, current, 0, RunLedger::default())
}

/// Continue a run from its rolling resume checkpoint, training up to
/// `config.n_iter` total iterations.
pub fn resume(config: &TrainerConfig, run_root: &Path) -> Result<RunLedger, TrainerError> {
    config.validate().map_err(TrainerError::Config)?;
    let paths = RunPaths::new(run_root);
    let loaded = checkpoint::load_checkpoint(&paths.resume())?;
    let header = &loaded.header;
    let start_iter = header.iteration;
    let rngs = header
        .trainer_rngs
        .clone()
        .ok_or_else(|| CheckpointError::Corrupt("resume checkpoint lacks trainer RNGs".into()))?;
    let current: DamageCase = header
        .current_case
        .parse()
        .map_err(|_| CheckpointError::Corrupt("bad current_case label".into()))?;
    let mut env = build_env(config.env);
    let learner = loaded.into_learner()?;
    let ledger = read_ledger(&paths)?;
    run_loop(
        config,
        paths,
        env.as_mut(),
        learner,
        rngs,
        current,
        start_iter,
        ledger,
    )
}

pub fn read_ledger(paths: &RunPaths) -> Result<RunLedger, TrainerError> {
    let mut ledger = RunLedger::default();
    if paths.ledger().exists() {
        let text =
            std::fs::read_to_string(paths.ledger()).map_err(|e| io_err(&paths.ledger(), e))?;
        for line in text.lines() {
            let record: IterationRecord = serde_json::from_str(line).map_err(|e| {
                TrainerError::Config(format!("corrupt ledger line: {e}"))
            })?;
            ledger.records.push(record);
        }
    }
    Ok(ledger)
}

#[allow(clippy::too_many_arguments)]
fn run_loop(
    config: &TrainerConfig,
    paths: RunPaths,
    env: &mut dyn Environment,
    mut learner: Learner,
    mut rngs: TrainerRngs,
    mut current: DamageCase,
    start_iter: usize,
    mut ledger: RunLedger,
) -> Result<RunLedger, TrainerError> {
    let spec = env.spec().clone();
    std::fs::create_dir_all(paths.root.join("checkpoints"))
        .map_err(|e| io_err(&paths.root, e))?;
    if config.mode == TrainMode::Rsac {
        std::fs::create_dir_all(paths.root.join("adversary"))
            .map_err(|e| io_err(&paths.root, e))?;
    }

    // A separate instance for adversary evaluation keeps training and
    // evaluation episode state fully independent.
    let mut eval_env = build_env(config.env);

    for iter in start_iter + 1..=config.n_iter {
        let started = Instant::now();
        let mut return_sum = 0.0;
        let mut success_sum = 0usize;
        for ep in 1..=config.episodes_per_iter {
            let mixin = config.undamaged_mixin > 0.0
                && rngs.mixin.uniform() < config.undamaged_mixin;
            let case = if mixin { DamageCase::empty() } else { current.clone() };
            let q = make_q(&case, AngleSource::Random(&mut rngs.angles), &spec)?;
            let env_seed = rngs.env_seed.next_u64();
            let stats = learner.train_episode(env, q, env_seed, &mut rngs.explore)?;
            return_sum += stats.episode_return;
            success_sum += stats.success as usize;
            append_line(
                &paths.episodes_log(),
                &format!(
                    "iter={iter} ep={ep} q={} steps={} return={} success={} env_steps={} updates={}",
                    case.label(),
                    stats.steps,
                    stats.episode_return,
                    stats.success,
                    learner.env_steps,
                    learner.updates
                ),
            )?;
        }

        let policy = learner.policy();
        let (next_case, trace_file) = if config.mode == TrainMode::Rsac {
            let eval_root = config.eval_seed.unwrap_or(config.seed);
            let seed_base = derive(eval_root, derive(tags::ADVERSARY_EVAL, iter as u64));
            let mut evaluator = RolloutEvaluator::new(
                &policy,
                eval_env.as_mut(),
                config.adversary.eval_episodes,
                seed_base,
                config.sac.gamma,
            );
            let (case, trace) = greedy_search(&mut evaluator, &config.adversary, seed_base)?;
            let trace_path = paths.adversary_trace(iter);
            std::fs::write(&trace_path, trace.render())
                .map_err(|e| io_err(&trace_path, e))?;
            (case, Some(format!("adversary/iter_{iter:04}.trace")))
        } else {
            (DamageCase::empty(), None)
        };

        if config.clear_buffer_on_switch && next_case != current {
            learner.buffer.clear();
        }

        let ckpt_rel = format!("checkpoints/iter_{iter:04}.rsnap");
        let ctx = SaveContext {
            mode: config.mode.as_str().to_string(),
            policy_id: config.policy_id(),
            iteration: iter,
            trainer_rngs: Some(rngs.clone()),
            current_case: next_case.label().to_string(),
        };
        checkpoint::save_checkpoint(&paths.iter_checkpoint(iter), &learner, &ctx, true, false)?;
        // Rolling full-fidelity checkpoint for exact resume.
        checkpoint::save_checkpoint(&paths.resume(), &learner, &ctx, true, true)?;

        let record = IterationRecord {
            iteration: iter,
            case: current.label().to_string(),
            episodes: config.episodes_per_iter,
            mean_return: return_sum / config.episodes_per_iter as f64,
            success_rate: success_sum as f64 / config.episodes_per_iter as f64,
            env_steps: learner.env_steps,
            updates: learner.updates,
            next_case: next_case.label().to_string(),
            checkpoint_file: ckpt_rel,
            adversary_trace_file: trace_file,
        };
        append_line(
            &paths.ledger(),
            &serde_json::to_string(&record).expect("record serializes"),
        )?;
        append_line(
            &paths.timings(),
            &format!("iter={iter} wall_ms={}", started.elapsed().as_millis()),
        )?;
        ledger.records.push(record);
        ledger.wall_clock_ms.push(started.elapsed().as_millis());

        current = if config.mode == TrainMode::Rsac {
            next_case
        } else {
            DamageCase::empty()
        };
    }

    // Final snapshot (policy + optimizer, no buffer).
    let ctx = SaveContext {
        mode: config.mode.as_str().to_string(),
        policy_id: config.policy_id(),
        iteration: config.n_iter,
        trainer_rngs: Some(rngs),
        current_case: current.label().to_string(),
    };
    checkpoint::save_checkpoint(&paths.final_checkpoint(), &learner, &ctx, true, false)?;
    Ok(ledger)
}

/// Damage-case distributions for the objective estimator.
#[derive(Debug, Clone)]
pub enum QDistribution {
    /// Point mass on one case.
    Fixed(DamageCase),
    /// One damaged joint, uniform over joints.
    UniformSingle,
    /// Uniform over all cases with at most M damaged joints (including the
    /// undamaged case).
    UniformUpTo(usize),
}

impl QDistribution {
    fn sample(&self, rng: &mut Pcg32, n_joints: usize) -> DamageCase {
        match self {
            QDistribution::Fixed(case) => case.clone(),
            QDistribution::UniformSingle => DamageCase::single(rng.below(n_joints)),
            QDistribution::UniformUpTo(m) => {
                let sets = crate::adversary::enumerate_sets(n_joints, *m);
                DamageCase::new(sets[rng.below(sets.len())].iter().copied().collect::<BTreeSet<_>>())
            }
        }
    }
}

/// Monte-Carlo estimate of the training objective: the expectation over
/// damage configurations of the expected discounted return of the
/// deterministic policy.
pub fn estimate_objective(
    policy: &Policy,
    env: &mut dyn Environment,
    dist: &QDistribution,
    episodes_per_q: usize,
    num_q_samples: usize,
    gamma: f64,
    seed: u64,
) -> Result<f64, TrainerError> {
    if episodes_per_q == 0 || num_q_samples == 0 {
        return Err(TrainerError::Config(
            "estimate_objective needs at least one sample and one episode".into(),
        ));
    }
    // A point mass reduces exactly to evaluate_policy.
    if let QDistribution::Fixed(case) = dist {
        let report = evaluate_policy(policy, env, case, episodes_per_q, seed, gamma)?;
        return Ok(report.mean_discounted_return);
    }
    let mut sample_rng = Pcg32::new(derive(seed, 0xE57), 61);
    let mut total = 0.0;
    for s in 0..num_q_samples {
        let case = dist.sample(&mut sample_rng, env.spec().n_joints);
        let report = evaluate_policy(
            policy,
            env,
            &case,
            episodes_per_q,
            derive(seed, 0x1000 + s as u64),
            gamma,
        )?;
        total += report.mean_discounted_return;
    }
    Ok(total / num_q_samples as f64)
}
