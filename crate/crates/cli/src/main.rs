//! `gamfq`: train mean-field learners by self-play, pit checkpoints against
//! each other, and render replays.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when a command
//! fails. Diagnostics go to standard error; results go to files.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gamfq::engine::{ReplayWriter, ScenarioConfig, ScenarioSpec};
use gamfq::estimators::{gradient_suite, GRADCHECK_LAYERS};
use gamfq::evaluator::{
    faceoff, mean_action_gap_report, play_episode, render_replay, tournament, CheckpointPair, FaceoffPlan,
    FaceoffResult, Side, DEFAULT_ROUNDS,
};
use gamfq::learners::LearnerKind;
use gamfq::trainer::{resume, train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "gamfq", version, about = "Mean-field multi-agent reinforcement learning on a gridworld")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train two teams by self-play.
    Train(TrainArgs),
    /// Play greedy rounds between two trained algorithms.
    Faceoff(FaceoffArgs),
    /// Faceoffs between every pair of algorithms, with ELO ratings.
    Tournament(TournamentArgs),
    /// Render a replay log to PPM frames.
    Replay(ReplayArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Parse and check a scenario config.
    Validate(ValidateArgs),
    /// Report how far attention mean actions stray from the population mean.
    GapReport(GapArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Learner: mfq, mfac, pomfq_for or gamfq. Overrides the config.
    #[arg(long)]
    alg: Option<LearnerKind>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's episode count.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FaceoffArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Checkpoint of the first algorithm, or `random`.
    #[arg(long)]
    a: String,
    /// Checkpoint of the second algorithm, or `random`.
    #[arg(long)]
    b: String,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for `faceoff.json` and `rounds.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the replay log of round 0 here.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TournamentArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// One checkpoint per algorithm, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    ckpt: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for `ratings.csv` and `pairs.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    frames: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Seeds 0..N.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Write the full report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct GapArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// A GAMFQ checkpoint (either team's file).
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `gap.csv` and `gap_histogram.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Faceoff(args) => cmd_faceoff(args),
        Command::Tournament(args) => cmd_tournament(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Validate(args) => cmd_validate(args),
        Command::GapReport(args) => cmd_gap(args),
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    Ok(load_config(path)?.spec)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let scenario = load_config(&args.config)?;
    let mut config = TrainConfig::from_scenario_config(&scenario, args.alg, args.seed, &args.out)?;
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    config.workers = args.workers;
    config.validate()?;
    eprintln!(
        "training {} for {} episodes on {} (seed {}, {} worker(s))",
        config.kind,
        config.epochs,
        config.scenario.kind.as_str(),
        config.seed,
        config.workers
    );
    let run = match &args.resume {
        Some(ckpt) => resume(ckpt, config).with_context(|| format!("resuming from {}", ckpt.display()))?,
        None => train(config)?,
    };
    if let Some(last) = run.metrics.last() {
        let total: f64 = run.wall_seconds.iter().sum();
        eprintln!(
            "episode {}: reward A {:.2}, B {:.2}; survivors {}-{}; {:.1}s total",
            last.episode, last.reward_a, last.reward_b, last.survivors_a, last.survivors_b, total
        );
    }
    for path in &run.checkpoints {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

enum Entry {
    Random,
    Trained(CheckpointPair),
}

impl Entry {
    fn load(arg: &str, spec: &ScenarioSpec) -> Result<Self> {
        if arg == "random" {
            return Ok(Entry::Random);
        }
        let path = Path::new(arg);
        let pair = CheckpointPair::load(path, spec).with_context(|| format!("loading {}", path.display()))?;
        Ok(Entry::Trained(pair))
    }

    fn side(&self) -> Side<'_> {
        match self {
            Entry::Random => Side::Uniform,
            Entry::Trained(pair) => Side::Trained(pair),
        }
    }
}

fn summarize(r: &FaceoffResult) {
    eprintln!(
        "{} vs {}: {} wins, {} draws, {} losses; win rate {:.3} (halves {:.3} / {:.3}, std {:.3}, bootstrap std {:.3})",
        r.first,
        r.second,
        r.wins,
        r.draws,
        r.losses,
        r.win_rate,
        r.half_win_rates[0],
        r.half_win_rates[1],
        r.half_std,
        r.bootstrap_std
    );
    eprintln!("ratings: {} {:.1}, {} {:.1}", r.first, r.ratings[0].rating, r.second, r.ratings[1].rating);
}

fn cmd_faceoff(args: FaceoffArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let first = Entry::load(&args.a, &spec)?;
    let second = Entry::load(&args.b, &spec)?;
    let plan = FaceoffPlan { scenario: spec, rounds: args.rounds, seed_base: args.seed, workers: args.workers };
    let result = faceoff(&plan, first.side(), second.side())?;
    summarize(&result);
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("faceoff.json"), serde_json::to_vec_pretty(&result)?)?;
        let mut w = csv::Writer::from_path(dir.join("rounds.csv"))?;
        for r in &result.rounds {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    if let Some(path) = &args.record {
        let controllers = [first.side().controller(0), second.side().controller(1)];
        let world = gamfq::engine::World::with_seed(&plan.scenario, plan.seed_base, 0)?;
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = ReplayWriter::new(BufWriter::new(file), &world)?;
        play_episode(&plan.scenario, plan.seed_base, 0, &controllers, Some(&mut writer))?;
        writer.into_inner()?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_tournament(args: TournamentArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let entries: Vec<Entry> = args.ckpt.iter().map(|c| Entry::load(c, &spec)).collect::<Result<_>>()?;
    let sides: Vec<Side<'_>> = entries.iter().map(Entry::side).collect();
    let plan = FaceoffPlan { scenario: spec, rounds: args.rounds, seed_base: args.seed, workers: args.workers };
    let result = tournament(&plan, &sides)?;
    for (_, r) in &result.faceoffs {
        summarize(r);
    }
    for (name, r) in result.names.iter().zip(&result.ratings) {
        eprintln!("{name}: {:.1} over {} games", r.rating, r.games);
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("ratings.csv"), result.ratings_csv()?)?;
        write_file(&dir.join("pairs.csv"), result.pairs_csv()?)?;
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    let frames = render_replay(&text, &args.frames).with_context(|| format!("rendering {}", args.log.display()))?;
    eprintln!("wrote {} frames to {}", frames.len(), args.frames.display());
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be positive");
    }
    let mut worst = vec![(0.0f64, 0.0f64); GRADCHECK_LAYERS.len()];
    let mut all = Vec::new();
    for seed in 0..args.seeds {
        for (k, report) in gradient_suite(seed)?.into_iter().enumerate() {
            let abs = report.params.iter().map(|p| p.max_abs_err).fold(0.0, f64::max);
            worst[k] = (worst[k].0.max(report.max_rel_err()), worst[k].1.max(abs));
            all.push((seed, report));
        }
    }
    let tolerance = all[0].1.tolerance;
    let mut failed = Vec::new();
    for (name, (err, abs)) in GRADCHECK_LAYERS.iter().zip(&worst) {
        let ok = *err < tolerance;
        eprintln!(
            "{name:<16} relative error {err:.3e}  max abs error {abs:.3e}  {}",
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(*name);
        }
    }
    if let Some(path) = &args.out {
        let json: Vec<_> = all.iter().map(|(seed, r)| serde_json::json!({ "seed": seed, "report": r })).collect();
        write_file(path, serde_json::to_vec_pretty(&json)?)?;
    }
    if !failed.is_empty() {
        bail!("gradient check failed for {}", failed.join(", "));
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    if let Some(training) = &config.training {
        let kind = if training.contains_key("algorithm") { None } else { Some(LearnerKind::Gamfq) };
        TrainConfig::from_scenario_config(&config, kind, None, "unused")
            .with_context(|| format!("{}: [training]", args.config.display()))?;
    }
    let spec = &config.spec;
    eprintln!(
        "{}: {} on {}x{}, {} vs {} agents, {} steps, scenario {}",
        args.config.display(),
        spec.kind.as_str(),
        spec.map_width,
        spec.map_height,
        spec.teams[0].count,
        spec.teams[1].count,
        spec.episode_length,
        &spec.hash()[..12]
    );
    Ok(())
}

fn cmd_gap(args: GapArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let pair = CheckpointPair::load(&args.checkpoint, &spec)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let report = mean_action_gap_report(&pair, &spec, args.episodes, args.seed, false)?;
    create_dir(&args.out)?;
    write_file(&args.out.join("gap.csv"), report.rows_csv()?)?;
    write_file(&args.out.join("gap_histogram.csv"), report.histogram_csv()?)?;
    let n = report.rows.len().max(1) as f64;
    let mean = report.rows.iter().map(|r| r.gap).sum::<f64>() / n;
    eprintln!("{} rows, mean gap {mean:.4}", report.rows.len());
    Ok(())
}
