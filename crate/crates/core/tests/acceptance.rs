//! Acceptance checks. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (bypassing the test harness capture) and then asserts on it.
//!
//! Criteria 9 to 11 train real learners and take tens of minutes on a single
//! core.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

use gamfq::engine::{
    Action, ActionId, AgentClass, ClassKind, ReplayWriter, ScenarioConfig, ScenarioKind, ScenarioSpec, World,
};
use gamfq::estimators::{
    dirichlet_mean, global_mean, gradient_suite, masked_mean, AdjacencyMask, DirichletState, GraphAttentionNet,
    MeanAction, NeighborActions, Star, StarBatch, GRADCHECK_LAYERS,
};
use gamfq::evaluator::{elo_deltas, expected_score, faceoff, fit_least_squares, CheckpointPair, FaceoffPlan, Outcome, Rating, Side};
use gamfq::learners::{sample_action, Hyperparameters, Learner, LearnerKind, Transition, Q_PREFIX};
use gamfq::nncore::{layers, ParamStore, Tape, Tensor};
use gamfq::rng;
use gamfq::trainer::{checkpoint_path, train, Controller, Rollout, TrainConfig};

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_SEEDS: u64 = 5;
const GRAD_BUDGET: Duration = Duration::from_secs(120);

const DIRICHLET_SAMPLES: usize = 100_000;
const DIRICHLET_SEEDS: u64 = 30;
const DIRICHLET_TOLERANCE: f64 = 0.005;

const FUZZ_CASES: usize = 10_000;
const SIMPLEX_TOLERANCE: f64 = 1e-9;

const DETERMINISM_STEPS: usize = 100;
const DETERMINISM_REPEATS: usize = 5;

const ELO_UPDATES: usize = 10_000;
const ELO_NORMALISATION: f64 = 1e-12;

const GUMBEL_DRAWS: usize = 10_000;
const GUMBEL_GAP: f64 = 5.0;
const GUMBEL_TEMPERATURE: f64 = 0.5;
const GUMBEL_MIN_FAVORED: f64 = 0.95;

const LEARNING_SEEDS: [u64; 3] = [1, 2, 3];
const LEARNING_EPISODES: usize = 300;
const LEARNING_BUDGET: Duration = Duration::from_secs(30 * 60);
const RANDOM_ROUNDS: usize = 100;
const RANDOM_MIN_WINS: usize = 80;

const ORDERING_SEEDS: [u64; 3] = [1, 2, 3];
const ORDERING_EPISODES: usize = 500;
const ORDERING_ROUNDS: usize = 200;
const ORDERING_MIN_WIN_RATE: f64 = 0.5;

const BANDIT_UPDATES: usize = 500;
const BANDIT_BATCH: usize = 64;
const BANDIT_TARGET: f64 = 0.9;

const WORKERS: usize = 4;

/// Keeps the timed criteria from sharing the CPU with each other.
static SERIAL: Mutex<()> = Mutex::new(());

fn report(criterion: usize, pass: bool, detail: impl std::fmt::Display) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion}: {verdict} {detail}");
    pass
}

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn battle_config() -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/battle_10v10.toml");
    ScenarioConfig::load(&path).unwrap()
}

fn majority(passes: usize, total: usize) -> bool {
    2 * passes > total
}

#[test]
fn criterion_01_gradient_fidelity() {
    let _guard = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut layers_seen = Vec::new();
    for seed in 0..GRAD_SEEDS {
        for r in gradient_suite(seed).unwrap() {
            if r.rel_err >= worst {
                worst = r.rel_err;
                worst_at = format!("{} seed {seed}", r.label);
            }
            if !layers_seen.contains(&r.label) {
                layers_seen.push(r.label.clone());
            }
        }
    }
    let elapsed = start.elapsed();
    let covered = GRADCHECK_LAYERS.iter().all(|l| layers_seen.iter().any(|s| s == l));
    let pass = covered && worst < GRAD_TOLERANCE && elapsed < GRAD_BUDGET;
    report(
        1,
        pass,
        format!(
            "gradient check over {GRAD_SEEDS} seeds, layers {layers_seen:?}: worst relative error {worst:.2e} ({worst_at}) < {GRAD_TOLERANCE:e}, {:.1}s < {}s",
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_dirichlet_oracle() {
    let _guard = serial();
    let na = NeighborActions::from_actions(3, &[(1, 0), (2, 0), (3, 0), (4, 1)]).unwrap();
    let exact = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
    let state = DirichletState::from_neighbors(&na, 1.0, DIRICHLET_SAMPLES);
    assert_eq!(state.counts, vec![3, 1, 0]);
    let errors: Vec<f64> = (0..DIRICHLET_SEEDS)
        .map(|seed| {
            let m = dirichlet_mean(&state, &mut rng::stream(seed, &[0xd1])).unwrap();
            m.probs().iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    let within = errors.iter().filter(|&&e| e <= DIRICHLET_TOLERANCE).count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let pass = within == errors.len();
    report(
        2,
        pass,
        format!("Dirichlet mean within L∞ {DIRICHLET_TOLERANCE} on {within}/{DIRICHLET_SEEDS} seeds (worst {worst:.5})"),
    );
    assert!(pass);
}

fn on_simplex(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
}

fn bits(m: &MeanAction) -> Vec<u64> {
    m.probs().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn criterion_03_simplex_fuzz() {
    let _guard = serial();
    let mut g = rng::stream(3, &[0x51]);
    let mut store = ParamStore::new();
    let hidden_len = 8;
    let net = GraphAttentionNet::register(&mut store, 6, hidden_len, &mut g).unwrap();
    let mut off = [0usize; 4];
    let mut full_mismatch = 0;
    for _ in 0..FUZZ_CASES {
        let n_actions = g.random_range(1..=21);
        let k = g.random_range(0..=20);
        let entries: Vec<(usize, ActionId)> = (0..k).map(|i| (i + 1, g.random_range(0..n_actions))).collect();
        let na = NeighborActions::from_actions(n_actions, &entries).unwrap();

        let global = global_mean(&na);
        off[0] += usize::from(!on_simplex(global.probs()));

        let mask = AdjacencyMask((0..k).map(|_| g.random_bool(0.5)).collect());
        off[1] += usize::from(!on_simplex(masked_mean(&mask, &na).unwrap().probs()));

        let state = DirichletState::from_neighbors(&na, g.random_range(0.05..5.0), 16);
        off[2] += usize::from(!on_simplex(dirichlet_mean(&state, &mut g).unwrap().probs()));

        let hidden = Tensor::from_vec(
            k + 1,
            hidden_len,
            (0..(k + 1) * hidden_len).map(|_| g.random_range(-3.0..3.0)).collect(),
        )
        .unwrap();
        let batch = StarBatch::new(vec![Star { center: 0, leaves: (1..=k).collect() }]);
        let selected = net.select(&store, &hidden, &batch, &mut g).unwrap().remove(0);
        off[3] += usize::from(!on_simplex(masked_mean(&selected, &na).unwrap().probs()));

        let full = masked_mean(&AdjacencyMask::full(k), &na).unwrap();
        full_mismatch += usize::from(bits(&full) != bits(&global));
    }
    let pass = off.iter().all(|&n| n == 0) && full_mismatch == 0;
    report(
        3,
        pass,
        format!(
            "{FUZZ_CASES} inputs per estimator, off-simplex (global, masked, Dirichlet, graph attention) = {off:?}, full-mask mismatches vs global = {full_mismatch}"
        ),
    );
    assert!(pass);
}

fn determinism_log(spec: &ScenarioSpec, learners: &[Learner; 2], threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let controllers = [
            Controller::Learner { learner: &learners[0], greedy: false },
            Controller::Learner { learner: &learners[1], greedy: false },
        ];
        let world = World::with_seed(spec, 42, 1).unwrap();
        let mut log = ReplayWriter::new(Vec::new(), &world).unwrap();
        let mut rollout = Rollout::new(world, 42, &controllers).unwrap();
        while !rollout.world().is_terminal() {
            let record = rollout.step(&controllers, [0.1, 0.1]).unwrap();
            log.record(rollout.world(), &record.actions, &record.outcome).unwrap();
        }
        assert_eq!(rollout.world().step_index(), DETERMINISM_STEPS);
        log.into_inner().unwrap()
    })
}

#[test]
fn criterion_04_engine_determinism() {
    let _guard = serial();
    let mut spec = ScenarioSpec::multibattle();
    spec.episode_length = DETERMINISM_STEPS;
    let world = World::build(&spec).unwrap();
    let (f, l) = (world.obs_layout().feature_len(), world.n_actions());
    let mut g = rng::stream(4, &[0x4]);
    let learners = [
        Learner::new(LearnerKind::Gamfq, f, l, Hyperparameters::default(), &mut g).unwrap(),
        Learner::new(LearnerKind::PomfqFor, f, l, Hyperparameters::default(), &mut g).unwrap(),
    ];
    let reference = determinism_log(&spec, &learners, 1);
    let repeats_equal = (1..DETERMINISM_REPEATS).all(|_| determinism_log(&spec, &learners, 1) == reference);
    let workers_equal = determinism_log(&spec, &learners, WORKERS) == reference;
    let pass = repeats_equal && workers_equal && !reference.is_empty();
    report(
        4,
        pass,
        format!(
            "{DETERMINISM_STEPS}-step 25v25 Multibattle replay ({} bytes): identical over {DETERMINISM_REPEATS} runs = {repeats_equal}, 1 vs {WORKERS} workers = {workers_equal}",
            reference.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_action_tables() {
    let counts = |kind| {
        let c = AgentClass::of(kind);
        (c.move_offsets.len(), c.attack_offsets.len(), c.n_actions())
    };
    let battle = counts(ClassKind::Battle);
    let predator = counts(ClassKind::Predator);
    let prey = counts(ClassKind::Prey);
    let pass = battle == (13, 8, 21) && predator == (13, 8, 21) && prey == (21, 0, 21);
    report(
        5,
        pass,
        format!("(moves, attacks, total): battle {battle:?}, predator {predator:?}, prey {prey:?}"),
    );
    assert!(pass);
}

const STAY: ActionId = 0;

fn duel(kind: ScenarioKind, classes: [ClassKind; 2], layout: &[(i32, i32, i32)]) -> World {
    let mut spec = ScenarioSpec::new(kind, [(classes[0], 1), (classes[1], 1)]);
    spec.map_width = 10;
    spec.map_height = 10;
    spec.food_count = 0;
    let mut world = World::build(&spec).unwrap();
    world.arrange(layout).unwrap();
    world
}

fn attack(world: &World, team: u8, dx: i32, dy: i32) -> ActionId {
    let c = world.class(team);
    c.move_offsets.len() + c.attack_offsets.iter().position(|&o| o == (dx, dy)).unwrap()
}

fn step_move(world: &World, team: u8) -> ActionId {
    let c = world.class(team);
    (0..c.move_offsets.len()).find(|&k| c.action(k) == Some(Action::Move { dx: 1, dy: 0 })).unwrap()
}

#[test]
fn criterion_06_reward_constants() {
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let mut w = duel(ScenarioKind::Multibattle, [ClassKind::Battle; 2], &[(2, 2, 10), (7, 7, 10)]);
    let mv = step_move(&w, 0);
    checks.push(("multibattle move", w.step(&[Some(mv), Some(STAY)]).unwrap().rewards[0], -0.005));

    let mut w = duel(ScenarioKind::Multibattle, [ClassKind::Battle; 2], &[(2, 2, 10), (4, 2, 2)]);
    let miss = attack(&w, 0, -1, 0);
    checks.push(("multibattle attack empty", w.step(&[Some(miss), Some(STAY)]).unwrap().rewards[0], -0.1));
    let hit = attack(&w, 0, 2, 0);
    let mut w_hit = w.clone();
    w_hit.arrange(&[(2, 2, 10), (4, 2, 10)]).unwrap();
    checks.push(("multibattle hit", w_hit.step(&[Some(hit), Some(STAY)]).unwrap().rewards[0], 0.2));
    let kill = w.step(&[Some(hit), Some(STAY)]).unwrap();
    checks.push(("multibattle hit + kill", kill.rewards[0], 0.2 + 200.0));

    let mut w = duel(ScenarioKind::Gathering, [ClassKind::Battle; 2], &[(2, 2, 10), (4, 2, 10)]);
    let hit = attack(&w, 0, 2, 0);
    checks.push(("gathering hit", w.step(&[Some(hit), Some(STAY)]).unwrap().rewards[0], 5.0));

    let classes = [ClassKind::Predator, ClassKind::Prey];
    let mut w = duel(ScenarioKind::PredatorPrey, classes, &[(2, 2, 10), (4, 2, 2)]);
    let hit = attack(&w, 0, 2, 0);
    checks.push(("predator hit", w.step(&[Some(hit), Some(STAY)]).unwrap().rewards[0], 1.0));
    checks.push(("predator hit + kill", w.step(&[Some(hit), Some(STAY)]).unwrap().rewards[0], 1.0 + 100.0));
    let mut w = duel(ScenarioKind::PredatorPrey, classes, &[(2, 2, 10), (8, 8, 2)]);
    let miss = attack(&w, 0, -1, -1);
    checks.push(("predator attack empty", w.step(&[Some(miss), Some(STAY)]).unwrap().rewards[0], -0.3));

    let wrong: Vec<_> = checks.iter().filter(|(_, got, want)| got != want).collect();
    let pass = wrong.is_empty();
    let detail: Vec<String> = checks.iter().map(|(name, got, _)| format!("{name} {got}")).collect();
    report(6, pass, format!("{}; mismatches {wrong:?}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_07_elo() {
    let equal = Rating::new(1000.0, 32.0);
    let (d1, d2) = elo_deltas(equal, equal, Outcome::Win);
    let plus_minus_16 = d1 == 16.0 && d2 == -16.0;

    let mut g = rng::stream(7, &[0xe1]);
    let mut not_zero_sum = 0;
    let mut worst_norm = 0.0f64;
    for _ in 0..ELO_UPDATES {
        let (r1, r2) = (g.random_range(0.0..3000.0), g.random_range(0.0..3000.0));
        let outcome = [Outcome::Win, Outcome::Draw, Outcome::Loss][g.random_range(0..3)];
        let (d1, d2) = elo_deltas(Rating::new(r1, 32.0), Rating::new(r2, 32.0), outcome);
        not_zero_sum += usize::from(d1 + d2 != 0.0);
        worst_norm = worst_norm.max((expected_score(r1, r2) + expected_score(r2, r1) - 1.0).abs());
    }
    let pass = plus_minus_16 && not_zero_sum == 0 && worst_norm <= ELO_NORMALISATION;
    report(
        7,
        pass,
        format!(
            "equal-rating win ({d1:+}, {d2:+}); {not_zero_sum}/{ELO_UPDATES} updates not zero-sum; worst |E1 + E2 - 1| = {worst_norm:.1e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_gumbel_hard_attention() {
    let mut g = rng::stream(8, &[0x9b]);
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let logits = Tensor::from_vec(GUMBEL_DRAWS, 2, [GUMBEL_GAP, 0.0].repeat(GUMBEL_DRAWS)).unwrap();
    let logits = tape.constant(logits);
    let hard = layers::gumbel_softmax(&mut tape, logits, GUMBEL_TEMPERATURE, true, &mut g).unwrap();
    let out = tape.value(hard);
    let one_hot = (0..GUMBEL_DRAWS).all(|r| {
        let row = out.row_slice(r);
        row.iter().all(|&x| x == 0.0 || x == 1.0) && row.iter().sum::<f64>() == 1.0
    });
    let favored = (0..GUMBEL_DRAWS).filter(|&r| out.get(r, 0) == 1.0).count() as f64 / GUMBEL_DRAWS as f64;

    let wide = Tensor::from_vec(64, 7, (0..64 * 7).map(|_| g.random_range(-4.0..4.0)).collect()).unwrap();
    let wide = tape.constant(wide);
    let wide_hard = layers::gumbel_softmax(&mut tape, wide, GUMBEL_TEMPERATURE, true, &mut g).unwrap();
    let wide_one_hot = (0..64).all(|r| {
        let row = tape.value(wide_hard).row_slice(r);
        row.iter().filter(|&&x| x == 1.0).count() == 1 && row.iter().all(|&x| x == 0.0 || x == 1.0)
    });

    let pass = one_hot && wide_one_hot && favored >= GUMBEL_MIN_FAVORED;
    report(
        8,
        pass,
        format!(
            "one-hot = {}, favored class chosen {:.2}% of {GUMBEL_DRAWS} draws (gap {GUMBEL_GAP}, τ = {GUMBEL_TEMPERATURE}) >= {:.0}%",
            one_hot && wide_one_hot,
            100.0 * favored,
            100.0 * GUMBEL_MIN_FAVORED
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_10_learning_progress_and_beating_random() {
    let _guard = serial();
    let config = battle_config();
    let mut progress = Vec::new();
    let mut beats_random = Vec::new();
    for seed in LEARNING_SEEDS {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = TrainConfig::from_scenario_config(&config, Some(LearnerKind::Gamfq), Some(seed), dir.path()).unwrap();
        cfg.epochs = LEARNING_EPISODES;
        cfg.workers = WORKERS;
        let start = Instant::now();
        let run = train(cfg.clone()).unwrap();
        let elapsed = start.elapsed();
        let points: Vec<(f64, f64)> = run.metrics.iter().map(|m| (m.episode as f64, m.reward_a)).collect();
        let (slope, _) = fit_least_squares(&points).unwrap();
        let ok = slope > 0.0 && elapsed < LEARNING_BUDGET && run.metrics.len() == LEARNING_EPISODES;
        progress.push(format!("seed {seed}: slope {slope:+.3}/episode in {:.0}s", elapsed.as_secs_f64()));
        progress.push(if ok { "ok".into() } else { "failed".into() });

        let ckpt = checkpoint_path(dir.path(), LearnerKind::Gamfq, 0, LEARNING_EPISODES);
        let pair = CheckpointPair::load(&ckpt, &cfg.scenario).unwrap();
        let mut plan = FaceoffPlan::new(cfg.scenario.clone(), RANDOM_ROUNDS, seed);
        plan.workers = WORKERS;
        let result = faceoff(&plan, Side::Trained(&pair), Side::Uniform).unwrap();
        beats_random.push((seed, result.wins, result.wins >= RANDOM_MIN_WINS));
    }
    let progress_passes = progress.iter().filter(|s| *s == "ok").count();
    let progress_pass = majority(progress_passes, LEARNING_SEEDS.len());
    let runs: Vec<&String> = progress.iter().step_by(2).collect();
    report(
        9,
        progress_pass,
        format!(
            "GAMFQ 10v10, {LEARNING_EPISODES} episodes, {progress_passes}/{} seeds with positive reward slope under {} min: {runs:?}",
            LEARNING_SEEDS.len(),
            LEARNING_BUDGET.as_secs() / 60
        ),
    );
    let random_passes = beats_random.iter().filter(|r| r.2).count();
    let random_pass = majority(random_passes, LEARNING_SEEDS.len());
    let wins: Vec<String> = beats_random.iter().map(|(s, w, _)| format!("seed {s}: {w}/{RANDOM_ROUNDS}")).collect();
    report(
        10,
        random_pass,
        format!(
            "greedy GAMFQ vs uniform random, >= {RANDOM_MIN_WINS}/{RANDOM_ROUNDS} wins on {random_passes}/{} seeds: {wins:?}",
            LEARNING_SEEDS.len()
        ),
    );
    assert!(progress_pass && random_pass);
}

#[test]
fn criterion_11_relative_ordering() {
    let _guard = serial();
    let config = battle_config();
    let mut outcomes = Vec::new();
    for seed in ORDERING_SEEDS {
        let dir = tempfile::tempdir().unwrap();
        let mut pairs = Vec::new();
        for kind in [LearnerKind::Gamfq, LearnerKind::PomfqFor] {
            let out = dir.path().join(kind.as_str());
            let mut cfg = TrainConfig::from_scenario_config(&config, Some(kind), Some(seed), &out).unwrap();
            cfg.epochs = ORDERING_EPISODES;
            cfg.workers = WORKERS;
            train(cfg.clone()).unwrap();
            let ckpt = checkpoint_path(&out, kind, 0, ORDERING_EPISODES);
            pairs.push(CheckpointPair::load(&ckpt, &cfg.scenario).unwrap());
        }
        let mut plan = FaceoffPlan::new(config.spec.clone(), ORDERING_ROUNDS, seed);
        plan.workers = WORKERS;
        let result = faceoff(&plan, Side::Trained(&pairs[0]), Side::Trained(&pairs[1])).unwrap();
        outcomes.push((seed, result.win_rate, result.wins, result.draws, result.losses));
    }
    let passes = outcomes.iter().filter(|o| o.1 >= ORDERING_MIN_WIN_RATE).count();
    let pass = majority(passes, ORDERING_SEEDS.len());
    let detail: Vec<String> = outcomes
        .iter()
        .map(|(s, r, w, d, l)| format!("seed {s}: win rate {r:.3} ({w}/{d}/{l})"))
        .collect();
    report(
        11,
        pass,
        format!(
            "GAMFQ vs POMFQ(FOR) after {ORDERING_EPISODES} episodes each, {ORDERING_ROUNDS} rounds, win rate >= {ORDERING_MIN_WIN_RATE} on {passes}/{} seeds: {detail:?}",
            ORDERING_SEEDS.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_12_mfac_bandit() {
    let mut g = rng::stream(12, &[0xba]);
    let mut learner = Learner::new(LearnerKind::Mfac, 1, 2, Hyperparameters::default(), &mut g).unwrap();
    let critic = learner.critic_mut();
    let shape = critic.get(&format!("{Q_PREFIX}.2.weight")).unwrap().shape();
    critic.set(&format!("{Q_PREFIX}.2.weight"), Tensor::zeros(shape[0], shape[1])).unwrap();
    critic.set(&format!("{Q_PREFIX}.2.bias"), Tensor::row(&[1.0, 0.0])).unwrap();

    let obs = Tensor::row(&[1.0]);
    let mean = MeanAction::uniform(2);
    let means = Tensor::row(mean.probs());
    let mut preferred = learner.policy(&obs, &means).unwrap().get(0, 0);
    let start = preferred;
    let mut updates = 0;
    while preferred <= BANDIT_TARGET && updates < BANDIT_UPDATES {
        let p = learner.policy(&obs, &means).unwrap();
        let batch: Vec<Transition> = (0..BANDIT_BATCH)
            .map(|_| Transition {
                obs: vec![1.0],
                action: sample_action(p.row_slice(0), 0.0, &mut g),
                reward: 0.0,
                next_obs: vec![1.0],
                mean_action: mean.probs().to_vec(),
                neighbor_actions: vec![],
                hidden: vec![],
                terminal: true,
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        learner.actor_update(&refs).unwrap();
        updates += 1;
        preferred = learner.policy(&obs, &means).unwrap().get(0, 0);
    }
    let pass = preferred > BANDIT_TARGET;
    report(
        12,
        pass,
        format!(
            "fixed-critic bandit: π(preferred) {start:.4} -> {preferred:.4} after {updates} actor updates (target > {BANDIT_TARGET} within {BANDIT_UPDATES})"
        ),
    );
    assert!(pass);
}
