//! Command-line frontend: train, search, heatmap, traces, noise.
//!
//! Exit codes: 0 ok, 2 usage/config error, 3 runtime abort.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rsac::adversary::{
    exhaustive_search, greedy_search, AdditiveEvaluator, AdversaryConfig, DamageEvaluator,
    RolloutEvaluator, TieBreak,
};
use rsac::checkpoint::load_checkpoint;
use rsac::config::RunConfigFile;
use rsac::env::EnvId;
use rsac::envs::build_env;
use rsac::fault::DamageCase;
use rsac::harness::{angle_traces, noise_experiment, success_matrix};
use rsac::report::{heatmap_svg, success_matrix_csv, traces_csv, trajectory_dump};
use rsac::rng::{derive, label_hash, tags, Pcg32};
use rsac::sac::{Learner, Policy};
use rsac::trainer::{self, TrainMode};

#[derive(Parser)]
#[command(
    name = "rsac",
    version,
    about = "Fault-aware adversarial reinforcement learning for joint-damage robustness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adversarial training loop (or the plain baseline).
    Train(TrainArgs),
    /// Search for the damage case that most degrades a policy.
    Search(SearchArgs),
    /// Evaluate a policy over all single and pairwise damage cases.
    Heatmap(HeatmapArgs),
    /// Record per-step task traces for chosen damage cases.
    Traces(TracesArgs),
    /// Success rate under Gaussian action noise.
    Noise(NoiseArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run directory (default: <out_root>/<env>-<mode>-s<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume an interrupted run from its rolling checkpoint.
    #[arg(long, conflicts_with = "out")]
    resume: Option<PathBuf>,
    // Flag overrides; flags win over the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    env: Option<EnvId>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<TrainMode>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    episodes_per_iter: Option<usize>,
    /// Zero the q flags in every observation (convergence ablation).
    #[arg(long)]
    blind: bool,
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    match s {
        "rsac" => Ok(TrainMode::Rsac),
        "sac-baseline" => Ok(TrainMode::SacBaseline),
        other => Err(format!("unknown mode {other:?} (rsac | sac-baseline)")),
    }
}

fn parse_env(s: &str) -> Result<EnvId, String> {
    s.parse()
}

#[derive(Args)]
struct SearchArgs {
    /// Trained checkpoint to attack.
    #[arg(long, required_unless_present = "scripted_weights")]
    checkpoint: Option<PathBuf>,
    /// M: number of joints to damage.
    #[arg(long, default_value_t = 2)]
    max_damaged: usize,
    /// E: evaluation episodes per candidate.
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the exhaustive oracle instead of greedy.
    #[arg(long)]
    exhaustive: bool,
    /// Cap on exhaustively enumerated sets.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, value_parser = rsac::config::parse_tie_break, default_value = "lowest-index")]
    tie_break: TieBreak,
    /// Stop early when extra damage no longer reduces return.
    #[arg(long)]
    early_stop: bool,
    /// Write the stage-by-stage search trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Test mode: comma-separated additive per-joint weights evaluated in
    /// closed form instead of a checkpoint.
    #[arg(long)]
    scripted_weights: Option<String>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel evaluation workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory for heatmap.csv and heatmap.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TracesArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Semicolon-separated damage cases, e.g. "0;1;2" or "2,7;0,3".
    #[arg(long, default_value = "")]
    cases: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for traces.csv.
    #[arg(long)]
    out: PathBuf,
    /// Also dump every step of every traced episode to this file.
    #[arg(long)]
    dump_steps: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 30)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional report file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum AppError {
    Usage(String),
    Runtime(String),
}

impl AppError {
    fn usage(e: impl std::fmt::Display) -> Self {
        AppError::Usage(e.to_string())
    }
    fn runtime(e: impl std::fmt::Display) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Search(args) => cmd_search(args),
        Command::Heatmap(args) => cmd_heatmap(args),
        Command::Traces(args) => cmd_traces(args),
        Command::Noise(args) => cmd_noise(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}

fn load_policy(path: &Path) -> Result<Policy, AppError> {
    Ok(load_checkpoint(path).map_err(AppError::usage)?.policy())
}

fn write_file(path: &Path, content: &str) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(AppError::runtime)?;
    }
    std::fs::write(path, content).map_err(AppError::runtime)
}

fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let mut config = RunConfigFile::load(&args.config).map_err(AppError::usage)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(env) = args.env {
        config.env = env;
    }
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(n) = args.n_iter {
        config.n_iter = n;
    }
    if let Some(k) = args.episodes_per_iter {
        config.episodes_per_iter = k;
    }
    if args.blind {
        config.q_visible = false;
    }
    let trainer_config = config.to_trainer();
    trainer_config.validate().map_err(AppError::usage)?;

    if let Some(run_dir) = args.resume {
        let ledger = trainer::resume(&trainer_config, &run_dir).map_err(AppError::runtime)?;
        println!("{}", run_dir.display());
        println!(
            "resumed through iteration {}",
            ledger.records.last().map_or(0, |r| r.iteration)
        );
        return Ok(());
    }

    let out_root = std::env::var("RSAC_OUT_ROOT").unwrap_or_else(|_| config.out_root.clone());
    let run_dir = args.out.unwrap_or_else(|| {
        PathBuf::from(out_root).join(format!(
            "{}-{}{}-s{}",
            config.env.as_str(),
            config.mode.as_str(),
            if config.q_visible { "" } else { "-blind" },
            config.seed
        ))
    });
    std::fs::create_dir_all(&run_dir).map_err(AppError::runtime)?;
    // Self-describing run directory: the canonical config suffices to
    // reproduce the run.
    write_file(&run_dir.join("config.toml"), &config.canonical_toml())?;
    let ledger = trainer::train(&trainer_config, &run_dir).map_err(AppError::runtime)?;
    println!("{}", run_dir.display());
    for record in &ledger.records {
        println!(
            "iter {} case \"{}\" mean_return {:.3} success {:.2} next \"{}\"",
            record.iteration,
            record.case,
            record.mean_return,
            record.success_rate,
            record.next_case
        );
    }
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<(), AppError> {
    let adversary_config = AdversaryConfig {
        max_damaged: args.max_damaged,
        eval_episodes: args.episodes,
        tie_break: args.tie_break,
        early_stop: args.early_stop,
    };

    let run =
        |evaluator: &mut dyn DamageEvaluator| -> Result<(DamageCase, Option<String>), AppError> {
            if args.exhaustive {
                let (case, _) = exhaustive_search(evaluator, args.max_damaged, args.budget)
                    .map_err(AppError::runtime)?;
                Ok((case, None))
            } else {
                let (case, trace) = greedy_search(evaluator, &adversary_config, args.seed)
                    .map_err(AppError::runtime)?;
                Ok((case, Some(trace.render())))
            }
        };

    let (case, trace) = if let Some(weights) = &args.scripted_weights {
        let weights: Vec<f64> = weights
            .split(',')
            .map(|w| w.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::usage(format!("bad --scripted-weights: {e}")))?;
        let mut evaluator = AdditiveEvaluator {
            base: 100.0,
            weights,
            max_damaged: args.max_damaged,
        };
        run(&mut evaluator)?
    } else {
        let checkpoint = args.checkpoint.as_ref().expect("clap enforces presence");
        let policy = load_policy(checkpoint)?;
        let env_id: EnvId = parse_env(&policy.env_id).map_err(AppError::usage)?;
        let mut env = build_env(env_id);
        let seed_base = derive(args.seed, tags::ADVERSARY_EVAL);
        let mut evaluator =
            RolloutEvaluator::new(&policy, env.as_mut(), args.episodes, seed_base, 1.0);
        run(&mut evaluator)?
    };

    println!("{}", case.label());
    if let (Some(path), Some(trace)) = (&args.trace, trace) {
        write_file(path, &trace)?;
    }
    Ok(())
}

fn cmd_heatmap(args: HeatmapArgs) -> Result<(), AppError> {
    if args.trials == 0 {
        return Err(AppError::Usage("--trials must be at least 1".into()));
    }
    let policy = load_policy(&args.checkpoint)?;
    let env_id: EnvId = parse_env(&policy.env_id).map_err(AppError::usage)?;
    let matrix = success_matrix(&policy, env_id, args.trials, args.seed, args.jobs)
        .map_err(AppError::runtime)?;
    write_file(&args.out.join("heatmap.csv"), &success_matrix_csv(&matrix))?;
    write_file(&args.out.join("heatmap.svg"), &heatmap_svg(&matrix))?;
    println!(
        "mean {:.4} diagonal_min {:.4} diagonal_mean {:.4}",
        matrix.mean(),
        matrix.diagonal_min(),
        matrix.diagonal_mean()
    );
    Ok(())
}

fn cmd_traces(args: TracesArgs) -> Result<(), AppError> {
    let policy = load_policy(&args.checkpoint)?;
    let env_id: EnvId = parse_env(&policy.env_id).map_err(AppError::usage)?;
    let cases: Vec<DamageCase> = args
        .cases
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<DamageCase>())
        .collect::<Result<_, _>>()
        .map_err(AppError::usage)?;
    let traces = angle_traces(&policy, env_id, &cases, args.seed).map_err(AppError::runtime)?;
    write_file(&args.out.join("traces.csv"), &traces_csv(&traces))?;
    if let Some(dump) = &args.dump_steps {
        let mut text = String::new();
        let reference = DamageCase::empty();
        for (episode, case) in std::iter::once(&reference).chain(cases.iter()).enumerate() {
            let case_seed = derive(args.seed, label_hash(case.label()));
            let mut angle_rng = Pcg32::new(derive(case_seed, tags::FROZEN_ANGLES), 31);
            let mut env = build_env(env_id);
            let q = rsac::fault::make_q(
                case,
                rsac::fault::AngleSource::Random(&mut angle_rng),
                env.spec(),
            )
            .map_err(AppError::runtime)?;
            let traj = Learner::rollout(&policy, env.as_mut(), q, false, case_seed, 1.0)
                .map_err(AppError::runtime)?;
            text.push_str(&trajectory_dump(episode, case.label(), &traj));
        }
        write_file(dump, &text)?;
    }
    for trace in &traces {
        let last = trace.values.last().copied().unwrap_or(f64::NAN);
        println!(
            "case \"{}\" steps {} final {:.4}",
            trace.label,
            trace.values.len(),
            last
        );
    }
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<(), AppError> {
    if args.episodes == 0 {
        return Err(AppError::Usage("--episodes must be at least 1".into()));
    }
    let policy = load_policy(&args.checkpoint)?;
    let env_id: EnvId = parse_env(&policy.env_id).map_err(AppError::usage)?;
    let rate = noise_experiment(&policy, env_id, args.sigma, args.episodes, args.seed)
        .map_err(AppError::runtime)?;
    let line = format!(
        "env={} policy={} sigma={} episodes={} success_rate={}",
        env_id, policy.id, args.sigma, args.episodes, rate
    );
    if let Some(path) = &args.out {
        write_file(path, &format!("{line}\n"))?;
    }
    println!("{line}");
    Ok(())
}
