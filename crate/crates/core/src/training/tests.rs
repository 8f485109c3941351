use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::action::Action;
use crate::engine::ArenaConfig;
use crate::nn::{ppo_loss, PolicyParams, PpoHyper, PpoSample};

/// O(T²) definition: A_t = Σ_l (γλ)^l δ_{t+l}, truncated at the first done.
fn brute_gae(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let next = if k + 1 < n { v[k + 1] } else { boot };
                let live = if d[k] { 0.0 } else { 1.0 };
                acc += w * (r[k] + g * next * live - v[k]);
                if d[k] {
                    break;
                }
                w *= g * l;
            }
            acc
        })
        .collect()
}

#[test]
fn gae_trivial_cases() {
    let (a, r) = compute_gae(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, 0.99, 0.95);
    assert!(a.iter().chain(&r).all(|&x| x == 0.0));
    let (a, r) = compute_gae(&[1.0], &[0.0], &[true], 7.0, 0.99, 0.95);
    assert_eq!((a[0], r[0]), (1.0, 1.0));
}

#[test]
fn gae_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = 100;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.05)).collect();
        let boot = rng.random_range(-1.0..1.0);
        let (a, ret) = compute_gae(&r, &v, &d, boot, 0.99, 0.95);
        let b = brute_gae(&r, &v, &d, boot, 0.99, 0.95);
        for t in 0..n {
            assert!((a[t] - b[t]).abs() <= 1e-12);
            assert!((ret[t] - (b[t] + v[t])).abs() <= 1e-12);
        }
    }
}

#[test]
fn gail_reward_formula() {
    assert!((gail_reward_from_prob(0.5, 1.0) - 2f64.ln()).abs() < 1e-15);
    assert!((gail_reward_from_prob(1.0, 1.0) - 16.118).abs() < 1e-3);
    assert!((gail_reward_from_prob(0.0, 1.0) - 1e-7).abs() < 1e-12);
    assert_eq!(gail_reward_from_prob(0.5, 2.0), 2.0 * 2f64.ln());
    let mut prev = 0.0;
    for k in 0..=100 {
        let r = gail_reward_from_prob(k as f64 / 100.0, 1.0);
        assert!(r.is_finite() && r >= prev);
        prev = r;
    }
}

#[test]
fn rollout_shape_and_determinism() {
    let p = PolicyParams::init(196, 3).unwrap();
    let opp = Opponent::Policy(std::sync::Arc::new(PolicyParams::init(196, 4).unwrap()));
    let a = collect_rollouts(
        &p,
        &opp,
        Scenario::SelfPlay,
        ArenaConfig::default(),
        2048,
        9,
    )
    .unwrap();
    let b = collect_rollouts(
        &p,
        &opp,
        Scenario::SelfPlay,
        ArenaConfig::default(),
        2048,
        9,
    )
    .unwrap();
    assert_eq!(a.n_agents, 3);
    assert_eq!(a.len(), 3 * 2048);
    assert_eq!(a, b);
    assert!(a.env_rewards.iter().all(|r| r.is_finite()));
}

#[test]
fn ratio_is_one_at_old_params() {
    let p = PolicyParams::init(196, 5).unwrap();
    let buf = collect_rollouts(
        &p,
        &Opponent::Idle,
        Scenario::FetchFlag,
        ArenaConfig::fetch_flag_curriculum(),
        512,
        2,
    )
    .unwrap();
    let out = p.forward_batch(buf.obs_matrix()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let samples: Vec<PpoSample> = (0..buf.len())
        .map(|i| PpoSample {
            act: buf.acts[i],
            old_logprob: buf.logprobs[i],
            advantage: rng.random_range(-1.0..1.0),
            ret: 0.0,
        })
        .collect();
    for chunk in (0..buf.len()).collect::<Vec<_>>().chunks(128) {
        let rows = Array2::from_shape_fn((chunk.len(), out.ncols()), |(r, c)| out[[chunk[r], c]]);
        let batch: Vec<_> = chunk.iter().map(|&i| samples[i]).collect();
        let h = PpoHyper {
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
        };
        let (s, _) = ppo_loss(rows.view(), &batch, &h).unwrap();
        assert!((s.mean_ratio - 1.0).abs() < 1e-12);
        assert_eq!(s.clip_frac, 0.0);
        assert!((s.policy_loss - s.unclipped_policy_loss).abs() < 1e-12);
    }
}

#[test]
fn selfplay_pool_rules() {
    let cur = std::sync::Arc::new(PolicyParams::init(35, 0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pool = SnapshotPool::new(10, 0.0);
    assert_eq!(pool.pick(&cur, &mut rng).0, Pick::Current);
    let mut evicted = Vec::new();
    for k in 0..15 {
        evicted.extend(pool.push(format!("s{k}"), cur.clone()));
    }
    assert_eq!(evicted, vec!["s0", "s1", "s2", "s3", "s4"]);
    assert_eq!(pool.ids().first().unwrap(), "s5");
    assert_eq!(pool.len(), 10);
    for _ in 0..100 {
        assert!(matches!(pool.pick(&cur, &mut rng).0, Pick::Snapshot(_)));
    }
    pool.latest_prob = 1.0;
    for _ in 0..100 {
        assert_eq!(pool.pick(&cur, &mut rng).0, Pick::Current);
    }
    pool.latest_prob = 0.5;
    let picks = |seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..50)
            .map(|_| pool.pick(&cur, &mut r).0)
            .collect::<Vec<_>>()
    };
    assert_eq!(picks(3), picks(3));
}

fn tiny_set(dim: usize, rows: &[(Vec<f64>, [u8; 3])]) -> DemoSet {
    let mut s = DemoSet::new(dim);
    for (o, a) in rows {
        s.push(o, Action::new(*a).unwrap());
    }
    s
}

#[test]
fn bc_memorises_single_step() {
    let obs: Vec<f64> = (0..35).map(|i| (i as f64 / 35.0) - 0.5).collect();
    let set = tiny_set(35, &vec![(obs.clone(), [2, 0, 1]); 32]);
    let mut p = PolicyParams::init(35, 1).unwrap();
    let mut adam = crate::nn::AdamState::new(p.net.num_params(), 1e-3);
    let idx: Vec<usize> = (0..32).collect();
    let mut loss = f64::INFINITY;
    for _ in 0..300 {
        loss = bc_step(&mut p, &mut adam, &set, &idx).unwrap();
    }
    assert!(loss < 1e-2, "{loss}");
    let out = p.forward(&obs).unwrap();
    assert_eq!(crate::nn::greedy_action(&out.logits).branches, [2, 0, 1]);
}

#[test]
fn bc_conflicting_labels_split_evenly() {
    let obs = vec![0.3; 35];
    let mut rows = vec![(obs.clone(), [0, 1, 0]); 16];
    rows.extend(vec![(obs.clone(), [2, 1, 0]); 16]);
    let set = tiny_set(35, &rows);
    let mut p = PolicyParams::init(35, 2).unwrap();
    let mut adam = crate::nn::AdamState::new(p.net.num_params(), 1e-3);
    let idx: Vec<usize> = (0..32).collect();
    for _ in 0..500 {
        bc_step(&mut p, &mut adam, &set, &idx).unwrap();
    }
    let lp = crate::nn::branch_log_probs(&p.forward(&obs).unwrap().logits);
    assert!((lp[0].exp() - 0.5).abs() < 0.02 && (lp[2].exp() - 0.5).abs() < 0.02);
    assert!(lp[1].exp() < 0.01);
}

#[test]
fn bc_loss_non_increasing_small_lr() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<_> = (0..64)
        .map(|_| {
            let o: Vec<f64> = (0..35).map(|_| rng.random_range(-1.0..1.0)).collect();
            (
                o,
                [
                    rng.random_range(0..3),
                    rng.random_range(0..3),
                    rng.random_range(0..2),
                ],
            )
        })
        .collect();
    let set = tiny_set(35, &rows);
    let mut p = PolicyParams::init(35, 3).unwrap();
    let mut adam = crate::nn::AdamState::new(p.net.num_params(), 1e-4);
    let idx: Vec<usize> = (0..64).collect();
    let mut prev = bc_eval_loss(&p, &set).unwrap();
    for _ in 0..100 {
        bc_step(&mut p, &mut adam, &set, &idx).unwrap();
        let l = bc_eval_loss(&p, &set).unwrap();
        assert!(l <= prev + 1e-12, "{l} > {prev}");
        prev = l;
    }
}

fn cluster(rng: &mut ChaCha8Rng, n: usize, centre: f64, act: [u8; 3]) -> PairBatch {
    PairBatch {
        obs: Array2::from_shape_fn((n, 35), |_| centre + rng.random_range(-0.1..0.1)),
        acts: vec![Action::new(act).unwrap(); n],
    }
}

#[test]
fn discriminator_separates_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut d = crate::nn::DiscriminatorParams::init(35, 1).unwrap();
    let mut adam = crate::nn::AdamState::new(d.net.num_params(), 1e-3);
    let mut acc = 0.0;
    for _ in 0..500 {
        let e = cluster(&mut rng, 64, 0.5, [2, 1, 0]);
        let p = cluster(&mut rng, 64, -0.5, [0, 1, 1]);
        gail_update(&mut d, &mut adam, &e, &p).unwrap();
        acc = discriminator_accuracy(
            &d,
            &cluster(&mut rng, 64, 0.5, [2, 1, 0]),
            &cluster(&mut rng, 64, -0.5, [0, 1, 1]),
        )
        .unwrap();
        if acc >= 0.99 {
            break;
        }
    }
    assert!(acc >= 0.99);
}

#[test]
fn discriminator_undecided_on_identical_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut d = crate::nn::DiscriminatorParams::init(35, 2).unwrap();
    let mut adam = crate::nn::AdamState::new(d.net.num_params(), 1e-4);
    for _ in 0..300 {
        let e = cluster(&mut rng, 64, 0.0, [1, 1, 0]);
        let p = cluster(&mut rng, 64, 0.0, [1, 1, 0]);
        gail_update(&mut d, &mut adam, &e, &p).unwrap();
    }
    let acc = discriminator_accuracy(
        &d,
        &cluster(&mut rng, 256, 0.0, [1, 1, 0]),
        &cluster(&mut rng, 256, 0.0, [1, 1, 0]),
    )
    .unwrap();
    assert!((acc - 0.5).abs() <= 0.05, "{acc}");
    assert!(gail_update(
        &mut d,
        &mut adam,
        &cluster(&mut rng, 4, 0.0, [1, 1, 0]),
        &PairBatch {
            obs: Array2::zeros((4, 34)),
            acts: vec![Action::NOOP; 4]
        }
    )
    .is_err());
}

fn small_cfg(dir: &std::path::Path, algorithm: Algorithm) -> TrainConfig {
    TrainConfig {
        run_id: "t".into(),
        seed: 3,
        algorithm,
        scenario: Scenario::FetchFlag,
        max_env_steps: 2048,
        ppo: PpoConfig {
            horizon: 512,
            minibatch: 128,
            ..PpoConfig::default()
        },
        eval_every: 1024,
        checkpoint_dir: dir.to_path_buf(),
        ..TrainConfig::default()
    }
}

#[test]
fn degenerate_combo_equals_ppo() {
    let dir = tempfile::tempdir().unwrap();
    let ppo = train(&small_cfg(dir.path(), Algorithm::Ppo)).unwrap();
    let combo = train(&small_cfg(
        dir.path(),
        Algorithm::Combo {
            bc_strength: 0.0,
            gail_strength: 0.0,
        },
    ))
    .unwrap();
    assert_eq!(ppo.checkpoint.policy, combo.checkpoint.policy);
    assert_eq!(ppo.report.episodes, combo.report.episodes);
    for (a, b) in ppo.report.iterations.iter().zip(&combo.report.iterations) {
        assert_eq!(a.ppo, b.ppo);
    }
    assert_eq!(ppo.report.checkpoints.len(), 2);
}

#[test]
fn training_is_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small_cfg(d1.path(), Algorithm::Ppo);
    cfg.scenario = Scenario::SelfPlay;
    cfg.arena = None;
    cfg.selfplay.snapshot_every = 512;
    let a = train(&cfg).unwrap();
    cfg.checkpoint_dir = d2.path().to_path_buf();
    let b = train(&cfg).unwrap();
    let strip = |mut r: RunReport| {
        r.checkpoints.clear();
        r.final_checkpoint.clear();
        r
    };
    assert_eq!(strip(a.report.clone()), strip(b.report));
    assert!(a.report.snapshots.len() >= 3);
    assert!(a.checkpoint_path.exists());
}

#[test]
fn combo_runs_with_demos() {
    let dir = tempfile::tempdir().unwrap();
    let arena = ArenaConfig::fetch_flag_curriculum();
    let bundles =
        crate::arena::generate_expert_demos(&arena, 1, 1, &dir.path().join("demos")).unwrap();
    let mut cfg = small_cfg(
        dir.path(),
        Algorithm::Combo {
            bc_strength: 0.5,
            gail_strength: 0.1,
        },
    );
    cfg.demo_paths = vec![bundles[0][0].clone()];
    let out = train(&cfg).unwrap();
    let it = &out.report.iterations;
    assert!(it[0].gail_accuracy.is_some() && it[0].ppo.bc_loss > 0.0);
    assert!(it[0].bc_strength > it.last().unwrap().bc_strength);
    assert!(out.checkpoint.discriminator.is_some());

    cfg.demo_paths = vec![dir.path().join("demos")];
    cfg.algorithm = Algorithm::Bc;
    cfg.bc.epochs = 2;
    let bc = train(&cfg).unwrap();
    assert_eq!(bc.report.bc_losses.len(), 2);
}

#[test]
fn anneal_schedule() {
    assert_eq!(anneal(0, 100), 1.0);
    assert_eq!(anneal(25, 100), 0.5);
    assert_eq!(anneal(50, 100), 0.0);
    assert_eq!(anneal(90, 100), 0.0);
}

#[test]
fn config_validation_and_overrides() {
    let cfg = TrainConfig {
        algorithm: Algorithm::Bc,
        ..TrainConfig::default()
    };
    assert!(matches!(cfg.validate(), Err(TrainError::Config(m)) if m.contains("demo_paths")));
    let cfg = TrainConfig {
        algorithm: Algorithm::Ppo,
        ..TrainConfig::default()
    };
    cfg.validate().unwrap();
    let o = cfg
        .with_overrides(&[
            "ppo.lr=0.001".into(),
            "algorithm=\"GAIL_PPO\"".into(),
            "run_id=abc".into(),
        ])
        .unwrap();
    assert_eq!(o.ppo.lr, 0.001);
    assert_eq!(o.algorithm, Algorithm::GailPpo);
    assert_eq!(o.run_id, "abc");
    assert!(cfg.with_overrides(&["ppo.nope=1".into()]).is_err());
    assert!(cfg.with_overrides(&["ppo=1".into()]).is_err());
    let bad = cfg.with_overrides(&["ppo.clip_eps=1.5".into()]).unwrap();
    assert!(bad.validate().is_err());
    let json = serde_json::to_string(&Algorithm::Combo {
        bc_strength: 0.5,
        gail_strength: 0.1,
    })
    .unwrap();
    assert_eq!(json, r#"{"Combo":{"bc_strength":0.5,"gail_strength":0.1}}"#);
    assert_eq!(serde_json::to_string(&Algorithm::Ppo).unwrap(), "\"PPO\"");
    assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn demo_layout_mismatch_cites_file() {
    let dir = tempfile::tempdir().unwrap();
    let b = crate::arena::generate_expert_demos(
        &ArenaConfig::fetch_flag_curriculum(),
        1,
        2,
        dir.path(),
    )
    .unwrap();
    let err = DemoSet::load(&[b[0][0].clone()], 35)
        .unwrap_err()
        .to_string();
    assert!(err.contains("agent0"), "{err}");
}
