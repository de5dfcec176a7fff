use gamfq::engine::{Action, ClassKind, ScenarioKind, ScenarioSpec, World};
use gamfq::evaluator::{faceoff, tournament, CheckpointPair, EvalError, FaceoffPlan, Side};
use gamfq::learners::{Hyperparameters, Learner, LearnerKind};
use gamfq::rng;
use gamfq::trainer::{checkpoint_path, train, TrainConfig};

fn toy(side: i32, n: usize, steps: usize) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, n), (ClassKind::Battle, n)]);
    spec.map_width = side;
    spec.map_height = side;
    spec.episode_length = steps;
    spec
}

fn fresh_pair(spec: &ScenarioSpec, kind: LearnerKind, seed: u64) -> CheckpointPair {
    let world = World::build(spec).unwrap();
    let f = world.obs_layout().feature_len();
    let l = world.n_actions();
    let hyper = Hyperparameters { hidden: 16, gat_hidden: 8, ..Default::default() };
    let mut g = rng::stream(seed, &[0]);
    let a = Learner::new(kind, f, l, hyper.clone(), &mut g).unwrap();
    let b = Learner::new(kind, f, l, hyper, &mut g).unwrap();
    CheckpointPair::new(kind.as_str(), a, b)
}

fn stay(_: &World, _: usize) -> usize {
    0
}

/// Attacks an enemy in reach, otherwise steps to the free cell closest to
/// the nearest enemy.
fn hunt(world: &World, id: usize) -> usize {
    let me = &world.agents()[id];
    let class = world.class_of(id);
    let enemies: Vec<_> = world.agents().iter().filter(|a| a.alive && a.team != me.team).collect();
    let n_moves = class.move_offsets.len();
    for (k, &(dx, dy)) in class.attack_offsets.iter().enumerate() {
        if let Some(o) = world.occupant(me.x + dx, me.y + dy) {
            if world.agents()[o].team != me.team {
                return n_moves + k;
            }
        }
    }
    let side = class.footprint_side;
    let free = |x: i32, y: i32| {
        (0..side).all(|dy| {
            (0..side).all(|dx| {
                let (cx, cy) = (x + dx, y + dy);
                cx >= 0
                    && cy >= 0
                    && cx < world.spec().map_width
                    && cy < world.spec().map_height
                    && world.occupant(cx, cy).is_none_or(|o| o == id)
            })
        })
    };
    let dist = |x: i32, y: i32| enemies.iter().map(|e| (e.x - x).abs() + (e.y - y).abs()).min().unwrap_or(0);
    (0..n_moves)
        .filter_map(|k| match class.action(k) {
            Some(Action::Move { dx, dy }) if free(me.x + dx, me.y + dy) => Some((dist(me.x + dx, me.y + dy), k)),
            _ => None,
        })
        .min()
        .map_or(0, |(_, k)| k)
}

#[test]
fn attacker_beats_a_stationary_opponent_every_round() {
    let spec = toy(8, 1, 100);
    let plan = FaceoffPlan::new(spec, 20, 5);
    let r = faceoff(&plan, Side::Scripted(&hunt), Side::Scripted(&stay)).unwrap();
    assert_eq!(r.wins, 20, "{:?}", r.rounds);
    assert_eq!(r.win_rate, 1.0);
    assert!(r.ratings[0].rating > r.ratings[1].rating);
    assert_eq!(r.ratings[0].games, 20u64);
}

#[test]
fn a_policy_against_itself_is_even() {
    let spec = toy(12, 3, 40);
    let pair = fresh_pair(&spec, LearnerKind::Mfq, 2);
    let plan = FaceoffPlan::new(spec, 100, 11);
    let r = faceoff(&plan, Side::Trained(&pair), Side::Trained(&pair)).unwrap();
    assert_eq!(r.wins + r.draws + r.losses, 100);
    assert!((r.win_rate - 0.5).abs() <= 0.15, "win rate {} ({} draws)", r.win_rate, r.draws);
    let outcomes: std::collections::HashSet<_> = r.rounds.iter().map(|x| x.outcome).collect();
    assert!(outcomes.len() > 1, "every round ended the same way");
}

#[test]
fn faceoffs_are_deterministic_across_worker_counts() {
    let spec = toy(12, 3, 30);
    let gamfq = fresh_pair(&spec, LearnerKind::Gamfq, 3);
    let mut plan = FaceoffPlan::new(spec, 10, 21);
    let serial = faceoff(&plan, Side::Trained(&gamfq), Side::Uniform).unwrap();
    let again = faceoff(&plan, Side::Trained(&gamfq), Side::Uniform).unwrap();
    plan.workers = 4;
    let parallel = faceoff(&plan, Side::Trained(&gamfq), Side::Uniform).unwrap();
    assert_eq!(serial, again);
    assert_eq!(serial, parallel);
    assert!(serial.rounds[..5].iter().all(|r| r.first_is_team_a));
    assert!(serial.rounds[5..].iter().all(|r| !r.first_is_team_a));
}

#[test]
fn odd_round_counts_are_rejected() {
    let plan = FaceoffPlan::new(toy(10, 1, 10), 7, 0);
    assert!(matches!(faceoff(&plan, Side::Uniform, Side::Uniform), Err(EvalError::Plan(_))));
}

#[test]
fn tournament_plays_every_unordered_pair_once() {
    let spec = toy(10, 2, 20);
    let mfq = fresh_pair(&spec, LearnerKind::Mfq, 1);
    let mfac = fresh_pair(&spec, LearnerKind::Mfac, 1);
    let plan = FaceoffPlan::new(spec, 6, 8);
    let entries = [Side::Trained(&mfq), Side::Trained(&mfac), Side::Uniform, Side::Scripted(&stay)];
    let t = tournament(&plan, &entries).unwrap();
    assert_eq!(t.faceoffs.len(), 6);
    for (k, r) in t.ratings.iter().enumerate() {
        assert_eq!(r.games as usize, plan.rounds * (entries.len() - 1), "participant {k}");
    }
    let total: f64 = t.ratings.iter().map(|r| r.rating).sum();
    assert!((total - 4000.0).abs() < 1e-9);
    assert_eq!(t.pairs_csv().unwrap().lines().count(), 7);
    assert!(t.pairs_csv().unwrap().starts_with("algorithm1,algorithm2,score1,score2"));
    assert_eq!(t.ratings_csv().unwrap().lines().count(), 5);
    let two = tournament(&plan, &entries[..2]).unwrap();
    assert_eq!(two.faceoffs.len(), 1);
    assert!(tournament(&plan, &entries[..1]).is_err());
}

#[test]
fn checkpoint_pairs_load_from_either_team_file() {
    let spec = toy(10, 2, 15);
    let dir = tempfile::tempdir().unwrap();
    let mut c = TrainConfig::new(spec.clone(), LearnerKind::PomfqFor, dir.path());
    c.epochs = 1;
    c.hyper = Hyperparameters { hidden: 16, batch_size: 8, ..Default::default() };
    train(c).unwrap();
    let a = checkpoint_path(dir.path(), LearnerKind::PomfqFor, 0, 1);
    let b = checkpoint_path(dir.path(), LearnerKind::PomfqFor, 1, 1);
    let from_a = CheckpointPair::load(&a, &spec).unwrap();
    let from_b = CheckpointPair::load(&b, &spec).unwrap();
    assert_eq!(from_a.name, "pomfq_for");
    for (x, y) in [(&from_a.a, &from_b.a), (&from_a.b, &from_b.b)] {
        let values = |l: &Learner| l.critic().ids().map(|id| l.critic().value(id).clone()).collect::<Vec<_>>();
        assert_eq!(values(x), values(y));
    }
    let other = toy(11, 2, 15);
    assert!(matches!(CheckpointPair::load(&a, &other), Err(EvalError::ScenarioMismatch { .. })));
}
