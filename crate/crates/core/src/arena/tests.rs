use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::demos::{read_demo, validate_demo};
use crate::engine::{mirror_id, BallMode};
use crate::geom::Vec2;

fn park_far(w: &mut WorldState, ids: &[usize]) {
    for (k, &i) in ids.iter().enumerate() {
        w.players[i].pos = Vec2::new(15.0, -8.0 + k as f64);
    }
}

#[test]
fn runner_heads_for_enemy_flag() {
    let w = WorldState::new(ArenaConfig::default(), 0).unwrap();
    let a = scripted_expert(&w, 0);
    assert_eq!(a.intent().mv[0], 1);
    // the White runner mirrors it
    assert_eq!(scripted_expert(&w, 3).intent().mv[0], -1);
}

#[test]
fn defender_throws_at_opponent_on_facing_ray() {
    let mut w = WorldState::new(ArenaConfig::default(), 0).unwrap();
    w.players[1].pos = Vec2::new(-14.0, 0.0);
    w.players[1].facing = Vec2::new(1.0, 0.0);
    w.players[1].held_ball = Some(0);
    w.balls[0].mode = BallMode::Held(1);
    w.balls[0].pos = w.players[1].pos;
    w.players[3].pos = Vec2::new(-9.0, 0.0);
    park_far(&mut w, &[4, 5]);
    let a = scripted_expert(&w, 1);
    assert!(a.intent().throw);
    assert_eq!(a.intent().mv, [1, 0]);
}

#[test]
fn no_throw_through_walls() {
    let mut w = WorldState::new(ArenaConfig::default(), 0).unwrap();
    // wall spans x in [-11, -10], y in [2.5, 7.5]
    w.players[1].pos = Vec2::new(-14.0, 5.0);
    w.players[1].held_ball = Some(0);
    w.balls[0].mode = BallMode::Held(1);
    w.players[3].pos = Vec2::new(-7.0, 5.0);
    park_far(&mut w, &[4, 5]);
    assert!(!scripted_expert(&w, 1).intent().throw);
}

#[test]
fn stunned_expert_idles() {
    let mut w = WorldState::new(ArenaConfig::default(), 0).unwrap();
    w.players[0].stun_ticks = 10;
    assert_eq!(scripted_expert(&w, 0), Action::NOOP);
}

#[test]
fn expert_is_mirror_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut w = WorldState::new(ArenaConfig::default(), 4).unwrap();
    for _ in 0..3000 {
        if w.outcome.is_over() {
            w.reset_round().unwrap();
        }
        let m = w.mirrored();
        for a in 0..NUM_PLAYERS {
            assert_eq!(
                scripted_expert(&m, mirror_id(a)),
                scripted_expert(&w, a).mirror_x()
            );
        }
        // seats swapped by the mirror see the same local picture and act alike
        let cfg = ObsConfig::default();
        for a in [0, 4] {
            let b = mirror_id(a);
            assert_eq!(
                crate::perception::observe(&w, a),
                crate::perception::observe(&m, b)
            );
            assert_eq!(
                cfg.frame_action(Team::of_player(a), scripted_expert(&w, a)),
                cfg.frame_action(Team::of_player(b), scripted_expert(&m, b))
            );
        }
        let acts: [Action; 6] = std::array::from_fn(|a| {
            if rng.random_bool(0.7) {
                scripted_expert(&w, a)
            } else {
                Action {
                    branches: [
                        rng.random_range(0..3),
                        rng.random_range(0..3),
                        rng.random_range(0..2),
                    ],
                }
            }
        });
        w.step(&acts).unwrap();
    }
}

#[test]
fn expert_vs_expert_is_balanced() {
    let m = evaluate(
        &ArenaConfig::default(),
        &PolicySource::Expert,
        &PolicySource::Expert,
        100,
        7,
    )
    .unwrap();
    assert!((0.35..=0.65).contains(&m.win_rate_blue), "{}", m.table());
    assert!((0.35..=0.65).contains(&m.win_rate_white), "{}", m.table());
    assert!(m.draw_rate < 0.2, "{}", m.table());
}

#[test]
fn random_vs_random_mostly_draws() {
    let m = evaluate(
        &ArenaConfig::default(),
        &PolicySource::Random,
        &PolicySource::Random,
        50,
        1,
    )
    .unwrap();
    assert!(m.draw_rate >= 0.8, "{}", m.table());
}

#[test]
fn expert_dominates_random() {
    let m = evaluate(
        &ArenaConfig::default(),
        &PolicySource::Expert,
        &PolicySource::Random,
        100,
        2,
    )
    .unwrap();
    assert!(m.win_rate_blue >= 0.9, "{}", m.table());
}

#[test]
fn evaluate_is_deterministic() {
    let arena = ArenaConfig::default();
    let a = evaluate(&arena, &PolicySource::Expert, &PolicySource::Random, 10, 3).unwrap();
    let b = evaluate(&arena, &PolicySource::Expert, &PolicySource::Random, 10, 3).unwrap();
    assert_eq!(a, b);
    assert!(evaluate(&arena, &PolicySource::Expert, &PolicySource::Random, 0, 3).is_err());
}

#[test]
fn swapping_sides_mirrors_rates() {
    // identical deterministic policies on both sides: the side should not matter
    let m = evaluate(
        &ArenaConfig::default(),
        &PolicySource::Expert,
        &PolicySource::Expert,
        500,
        11,
    )
    .unwrap();
    let se = (0.25f64 / 500.0).sqrt();
    assert!(
        (m.win_rate_blue - m.win_rate_white).abs() < 3.0 * se * 2f64.sqrt(),
        "{}",
        m.table()
    );
}

#[test]
fn synthetic_log_metrics() {
    let log = vec![
        EpisodeRecord::new(
            0,
            Outcome::Won {
                team: Team::Blue,
                time_s: 100.0,
            },
            1000.0,
        ),
        EpisodeRecord::new(
            1,
            Outcome::Won {
                team: Team::White,
                time_s: 50.0,
            },
            1000.0,
        ),
        EpisodeRecord::new(2, Outcome::Draw, 1000.0),
    ];
    let m = Metrics::from_log(log);
    assert!((m.mean_round_time_s - 1150.0 / 3.0).abs() < 1e-9);
    assert!((m.mean_round_time_s - 383.33).abs() < 0.01);
    assert_eq!(m.win_rate_blue, 1.0 / 3.0);
    assert_eq!(m.win_rate_white, 1.0 / 3.0);
    assert_eq!(m.draw_rate, 1.0 / 3.0);
    assert_eq!(m.mean_win_time_blue_s, Some(100.0));
    assert_eq!(m.mean_win_time_white_s, Some(50.0));
    assert!(m.csv().contains("2,draw,1000\n"));
    assert!(m.table().contains("383.33"));
}

fn arb_log() -> impl Strategy<Value = Vec<(u8, f64)>> {
    prop::collection::vec((0u8..3, 0.05f64..1000.0), 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn fuzzed_metrics_identities(entries in arb_log()) {
        let log: Vec<_> = entries.iter().enumerate().map(|(i, &(k, t))| {
            let o = match k {
                0 => Outcome::Won { team: Team::Blue, time_s: t },
                1 => Outcome::Won { team: Team::White, time_s: t },
                _ => Outcome::Draw,
            };
            EpisodeRecord::new(i, o, 1000.0)
        }).collect();
        let m = Metrics::from_log(log.clone());
        prop_assert!((m.win_rate_blue + m.win_rate_white + m.draw_rate - 1.0).abs() <= 1e-12);
        let blue: Vec<f64> = entries.iter().filter(|e| e.0 == 0).map(|e| e.1).collect();
        match m.mean_win_time_blue_s {
            Some(v) => prop_assert!((v - blue.iter().sum::<f64>() / blue.len() as f64).abs() < 1e-9),
            None => prop_assert!(blue.is_empty()),
        }
        let total: f64 = entries.iter().map(|e| if e.0 == 2 { 1000.0 } else { e.1 }).sum();
        prop_assert!((m.mean_round_time_s - total / entries.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn expert_demo_bundle_validates() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = generate_expert_demos(&ArenaConfig::default(), 1, 5, dir.path()).unwrap();
    assert_eq!(bundles.len(), 1);
    assert_eq!(bundles[0].len(), 6);
    for f in &bundles[0] {
        let r = validate_demo(f);
        assert!(r.ok, "{:?}", r.problems);
        assert_eq!(r.rounds, ROUNDS_PER_SESSION);
    }
    let trajs: Vec<_> = bundles[0].iter().map(|f| read_demo(f).unwrap()).collect();
    assert!(trajs
        .iter()
        .all(|t| t.header.source == crate::demos::Source::Scripted));
    assert_eq!(
        crate::demos::replay_bundle(&trajs).unwrap(),
        trajs[0].steps.len()
    );
}

#[test]
fn expert_demos_are_byte_identical() {
    let arena = ArenaConfig::fetch_flag_curriculum();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = generate_expert_demos(&arena, 10, 9, a.path()).unwrap();
    let fb = generate_expert_demos(&arena, 10, 9, b.path()).unwrap();
    for (x, y) in fa.iter().flatten().zip(fb.iter().flatten()) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        assert!(validate_demo(x).problems.is_empty());
    }
}

#[test]
fn derive_seed_spreads() {
    let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
    assert_eq!(s.len(), 1000);
    assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
}
