//! Evaluation harness: matches between policy sources, round statistics and
//! scripted-expert demonstration corpora.

mod controller;
mod expert;
mod metrics;

use std::path::{Path, PathBuf};

pub use controller::{
    Controller, ExpertController, PolicyController, PolicySource, RandomController,
};
pub use expert::{scripted_expert, Role, THROW_RANGE};
pub use metrics::{EpisodeRecord, EpisodeResult, Metrics};

use crate::action::Action;
use crate::demos::{bundle_file_name, DemoError, DemoHeader, DemoRecorder, Source};
use crate::engine::{ArenaConfig, EventKind, Outcome, Team, WorldState, NUM_PLAYERS};
use crate::error::EngineError;
use crate::perception::{compute_rewards, obs_dim, observe_into, ObsConfig, RewardSpec};

pub const ROUNDS_PER_SESSION: usize = 10;

/// Seed of episode (or session) `i` under base seed `seed`.
pub fn derive_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Plays one round to completion; returns the outcome.
pub fn play_round(
    world: &mut WorldState,
    blue: &mut dyn Controller,
    white: &mut dyn Controller,
) -> Result<Outcome, EngineError> {
    let mut actions = [Action::NOOP; NUM_PLAYERS];
    while !world.outcome.is_over() {
        for (a, slot) in actions.iter_mut().enumerate() {
            *slot = match Team::of_player(a) {
                Team::Blue => blue.act(world, a),
                Team::White => white.act(world, a),
            };
        }
        world.step(&actions)?;
    }
    Ok(world.outcome)
}

/// Plays `episodes` independent rounds; episode `i` uses world seed
/// `derive_seed(seed, i)`.
pub fn evaluate(
    arena: &ArenaConfig,
    blue: &PolicySource,
    white: &PolicySource,
    episodes: usize,
    seed: u64,
) -> Result<Metrics, EngineError> {
    if episodes == 0 {
        return Err(EngineError::Config("episodes must be at least 1".into()));
    }
    if let PolicySource::Policy { params, id } = blue.clone() {
        check_policy_dim(&id, params.obs_dim())?;
    }
    if let PolicySource::Policy { params, id } = white.clone() {
        check_policy_dim(&id, params.obs_dim())?;
    }
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(episodes);
    let mut log: Vec<EpisodeRecord> = Vec::with_capacity(episodes);
    let results: Vec<Result<Vec<EpisodeRecord>, EngineError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let mut out = Vec::new();
                    for i in (t..episodes).step_by(threads) {
                        let es = derive_seed(seed, i as u64);
                        let mut world = WorldState::new(arena.clone(), es)?;
                        let mut b = blue.controller(derive_seed(es, 1));
                        let mut w = white.controller(derive_seed(es, 2));
                        let outcome = play_round(&mut world, b.as_mut(), w.as_mut())?;
                        out.push(EpisodeRecord::new(i, outcome, arena.draw_time));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    for r in results {
        log.extend(r?);
    }
    log.sort_by_key(|e| e.episode);
    Ok(Metrics::from_log(log))
}

fn check_policy_dim(id: &str, dim: usize) -> Result<(), EngineError> {
    if crate::perception::rays_for_dim(dim).is_none() {
        return Err(EngineError::Config(format!(
            "policy {id} has obs_dim {dim}, which does not follow the observation layout"
        )));
    }
    Ok(())
}

/// Runs `n_sessions` expert-vs-expert sessions of [`ROUNDS_PER_SESSION`]
/// rounds, recording all six seats. Returns one bundle of six paths per
/// session.
pub fn generate_expert_demos(
    arena: &ArenaConfig,
    n_sessions: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<Vec<PathBuf>>, DemoError> {
    std::fs::create_dir_all(out_dir).map_err(|e| DemoError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    (0..n_sessions)
        .map(|i| {
            record_expert_session(
                arena,
                derive_seed(seed, i as u64),
                &format!("expert-{seed}-{i:03}"),
                out_dir,
            )
        })
        .collect()
}

fn record_expert_session(
    arena: &ArenaConfig,
    world_seed: u64,
    session_id: &str,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, DemoError> {
    let cfg = ObsConfig::default();
    let dim = obs_dim(arena, cfg.rays)?;
    let mut world = WorldState::new(arena.clone(), world_seed)?;
    let mut recs = (0..NUM_PLAYERS)
        .map(|a| {
            let h = DemoHeader::new(arena.clone(), dim, session_id, a, Source::Scripted)
                .with_seed(world_seed);
            DemoRecorder::create(&out_dir.join(bundle_file_name(session_id, a)), &h)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spec = RewardSpec::default();
    let mut obs = vec![vec![0.0; dim]; NUM_PLAYERS];
    let mut actions = [Action::NOOP; NUM_PLAYERS];
    for round in 0..ROUNDS_PER_SESSION {
        if round > 0 {
            world.reset_round()?;
        }
        while !world.outcome.is_over() {
            for a in 0..NUM_PLAYERS {
                observe_into(&world, a, &cfg, &mut obs[a]);
                actions[a] = scripted_expert(&world, a);
            }
            let events = world.step(&actions)?;
            let rew = compute_rewards(&events, &spec);
            let done = events
                .iter()
                .any(|e| matches!(e.kind, EventKind::RoundEnd(_)));
            for a in 0..NUM_PLAYERS {
                let local = cfg.frame_action(Team::of_player(a), actions[a]);
                recs[a].record_step(&obs[a], local, rew[a], done)?;
            }
        }
    }
    recs.into_iter().map(|r| r.finish()).collect()
}

#[cfg(test)]
mod tests;
