//! Learning stack: behavioural cloning, GAIL, PPO with GAE, their
//! combination, and snapshot self-play.

mod bc;
mod config;
mod dataset;
mod gae;
mod gail;
mod ppo;
mod rollout;
mod selfplay;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bc::{bc_epoch, bc_eval_loss, bc_step, branch_agreement};
pub use config::{
    Algorithm, BcConfig, GailConfig, PpoConfig, Scenario, SelfPlayConfig, TrainConfig,
};
pub use dataset::{resolve_demo_paths, DemoSet};
pub use gae::compute_gae;
pub use gail::{
    discriminator_accuracy, discriminator_probs, gail_reward, gail_reward_from_prob, gail_update,
    GailStep, PairBatch,
};
pub use ppo::{ppo_update, BcAux, PpoUpdateStats};
pub use rollout::{collect_rollouts, Collector, EpisodeStat, Opponent, RolloutBuffer};
pub use selfplay::{Pick, SnapshotPool};

use crate::arena::{derive_seed, evaluate, PolicySource};
use crate::demos::DemoError;
use crate::error::{ContractError, EngineError};
use crate::nn::{
    AdamState, Checkpoint, CheckpointError, DiscriminatorParams, NnError, PolicyParams, PpoHyper,
};
use crate::perception::obs_dim;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<ContractError> for TrainError {
    fn from(e: ContractError) -> Self {
        TrainError::Nn(NnError::Contract(e))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterStats {
    pub iteration: usize,
    pub env_steps: u64,
    pub opponent: String,
    pub episodes: usize,
    pub mean_episode_return: Option<f64>,
    pub bc_strength: f64,
    pub gail_strength: f64,
    pub gail_loss: Option<f64>,
    pub gail_accuracy: Option<f64>,
    pub mean_gail_reward: Option<f64>,
    pub ppo: PpoUpdateStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub env_steps: u64,
    pub mean_round_time_s: f64,
    pub draw_rate: f64,
    pub win_rate_blue: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: Option<Algorithm>,
    pub scenario: Option<Scenario>,
    pub env_steps: u64,
    pub iterations: Vec<IterStats>,
    pub episodes: Vec<EpisodeStat>,
    /// Mean BC loss per epoch (BC mode).
    pub bc_losses: Vec<f64>,
    pub snapshots: Vec<String>,
    pub checkpoints: Vec<String>,
    pub evaluations: Vec<EvalPoint>,
    pub final_checkpoint: String,
}

impl RunReport {
    /// Mean return of episodes that ended within `(lo, hi]` env steps.
    pub fn mean_return_between(&self, lo: u64, hi: u64) -> Option<f64> {
        let r: Vec<f64> = self
            .episodes
            .iter()
            .filter(|e| e.end_step > lo && e.end_step <= hi)
            .map(|e| e.ret)
            .collect();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }
}

/// Annealing factor for imitation strengths: linear from 1 to 0 over the
/// first half of the step budget.
pub fn anneal(step: u64, max_env_steps: u64) -> f64 {
    let horizon = (max_env_steps as f64 / 2.0).max(1.0);
    (1.0 - step as f64 / horizon).max(0.0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), TrainError> {
    let io = |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| io(std::io::Error::other(e)))?;
    std::fs::write(path, text).map_err(io)
}

fn check_params(policy: &PolicyParams, iteration: usize) -> Result<(), TrainError> {
    if let Some(i) = policy.net.params.iter().position(|v| !v.is_finite()) {
        return Err(TrainError::NonFinite(format!(
            "policy parameter {i} after iteration {iteration}"
        )));
    }
    Ok(())
}

/// Behavioural cloning for `cfg.bc.epochs` epochs; writes the final
/// checkpoint and report.
pub fn train_bc(cfg: &TrainConfig, demos: &DemoSet) -> Result<(Checkpoint, RunReport), TrainError> {
    if demos.is_empty() {
        return Err(TrainError::Config("BC needs at least one demo step".into()));
    }
    let mut policy = PolicyParams::init(demos.obs_dim, cfg.seed)?;
    let mut adam = AdamState::new(policy.net.num_params(), cfg.bc.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
    let mut report = RunReport {
        run_id: cfg.run_id.clone(),
        seed: cfg.seed,
        algorithm: Some(cfg.algorithm),
        ..RunReport::default()
    };
    for epoch in 0..cfg.bc.epochs {
        let loss = bc_epoch(&mut policy, &mut adam, demos, cfg.bc.batch, &mut rng)?;
        log::info!("bc epoch {epoch}: loss {loss:.5}");
        report.bc_losses.push(loss);
    }
    check_params(&policy, cfg.bc.epochs)?;
    let ck = Checkpoint::new(&cfg.run_id, cfg.seed, adam.step, policy);
    let path = cfg.run_dir().join("final.json");
    ck.save(&path)?;
    report.final_checkpoint = path.display().to_string();
    write_json(&cfg.run_dir().join("report.json"), &report)?;
    Ok((ck, report))
}

/// Result of a full training run.
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
    pub report: RunReport,
}

/// Loads demos as required by the config, then trains.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let dim = obs_dim(&cfg.arena(), crate::perception::DEFAULT_RAYS)?;
    let demos = if cfg.algorithm.needs_demos() {
        DemoSet::load(&cfg.demo_paths, dim)?
    } else {
        DemoSet::new(dim)
    };
    train_with(cfg, &demos)
}

/// Trains with an already loaded demo set.
pub fn train_with(cfg: &TrainConfig, demos: &DemoSet) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let arena = cfg.arena();
    let dim = obs_dim(&arena, crate::perception::DEFAULT_RAYS)?;
    if cfg.algorithm.needs_demos() && (demos.is_empty() || demos.obs_dim != dim) {
        return Err(TrainError::Config(format!(
            "algorithm {:?} needs demos with obs_dim {dim}",
            cfg.algorithm
        )));
    }
    if cfg.algorithm == Algorithm::Bc {
        let (checkpoint, report) = train_bc(cfg, demos)?;
        return Ok(TrainOutcome {
            checkpoint_path: PathBuf::from(&report.final_checkpoint),
            checkpoint,
            report,
        });
    }

    let mut policy = PolicyParams::init(dim, cfg.seed)?;
    let mut adam = AdamState::new(policy.net.num_params(), cfg.ppo.lr);
    let (bc0, gail0) = cfg.algorithm.strengths();
    let mut disc = if gail0 > 0.0 {
        Some(DiscriminatorParams::init(dim, derive_seed(cfg.seed, 11))?)
    } else {
        None
    };
    let mut disc_adam = disc
        .as_ref()
        .map(|d| AdamState::new(d.net.num_params(), cfg.gail.lr));
    let mut collector = Collector::new(
        cfg.scenario,
        arena.clone(),
        cfg.reward.clone(),
        derive_seed(cfg.seed, 1),
    )?;
    let mut rng_ppo = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));
    let mut rng_gail = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
    let mut rng_pool = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 4));
    let mut pool = SnapshotPool::new(cfg.selfplay.pool_size, cfg.selfplay.opponent_latest_prob);
    let hyper = PpoHyper {
        clip_eps: cfg.ppo.clip_eps,
        value_coef: cfg.ppo.value_coef,
        entropy_coef: cfg.ppo.entropy_coef,
    };
    let run_dir = cfg.run_dir();
    let mut report = RunReport {
        run_id: cfg.run_id.clone(),
        seed: cfg.seed,
        algorithm: Some(cfg.algorithm),
        scenario: Some(cfg.scenario),
        ..RunReport::default()
    };
    let mut next_snapshot = cfg.selfplay.snapshot_every;
    let mut next_ckpt = cfg.eval_every;
    let mut iteration = 0;
    let started = std::time::Instant::now();

    while collector.env_steps < cfg.max_env_steps {
        let step0 = collector.env_steps;
        let f = if cfg.algorithm.anneals() {
            anneal(step0, cfg.max_env_steps)
        } else {
            1.0
        };
        let (bc_s, gail_s) = (bc0 * f, gail0 * f);

        let current = Arc::new(policy.clone());
        let (opp_name, opponent) = match cfg.scenario {
            Scenario::FetchFlag => ("idle".to_string(), Opponent::Idle),
            Scenario::SelfPlay => match pool.pick(&current, &mut rng_pool) {
                (Pick::Current, p) => ("current".to_string(), Opponent::Policy(p)),
                (Pick::Snapshot(id), p) => (id, Opponent::Policy(p)),
            },
        };
        let episodes_before = collector.finished.len();
        let mut buf = collector.collect(&policy, &opponent, cfg.ppo.horizon)?;

        let mut stats = IterStats {
            iteration,
            opponent: opp_name,
            bc_strength: bc_s,
            gail_strength: gail_s,
            ..IterStats::default()
        };
        if let (Some(d), Some(da)) = (disc.as_mut(), disc_adam.as_mut()) {
            if gail_s > 0.0 {
                let mut last = None;
                for _ in 0..cfg.gail.updates_per_iter {
                    let ei = demos.sample_indices(cfg.gail.batch, &mut rng_gail);
                    let (eo, ea) = demos.gather(&ei);
                    let pi: Vec<usize> = (0..cfg.gail.batch)
                        .map(|_| rand::Rng::random_range(&mut rng_gail, 0..buf.len()))
                        .collect();
                    let mut po = Array2::zeros((pi.len(), dim));
                    for (r, &i) in pi.iter().enumerate() {
                        po.row_mut(r)
                            .as_slice_mut()
                            .expect("row-major")
                            .copy_from_slice(buf.obs_row(i));
                    }
                    let pa = pi.iter().map(|&i| buf.acts[i]).collect();
                    last = Some(gail_update(
                        d,
                        da,
                        &PairBatch { obs: eo, acts: ea },
                        &PairBatch { obs: po, acts: pa },
                    )?);
                }
                let all = PairBatch {
                    obs: buf.obs_matrix().to_owned(),
                    acts: buf.acts.clone(),
                };
                let probs = discriminator_probs(d, &all)?;
                for (g, p) in buf.gail_rewards.iter_mut().zip(probs) {
                    *g = gail_reward_from_prob(p, cfg.gail.reward_scale);
                }
                stats.gail_loss = last.map(|s| s.loss);
                stats.gail_accuracy = last.map(|s| s.accuracy);
                stats.mean_gail_reward =
                    Some(buf.gail_rewards.iter().sum::<f64>() / buf.len() as f64);
            }
        }

        let mut advantages = vec![0.0; buf.len()];
        let mut returns = vec![0.0; buf.len()];
        for k in 0..buf.n_agents {
            let r = buf.agent_range(k);
            let rewards: Vec<f64> = r
                .clone()
                .map(|i| buf.env_rewards[i] + gail_s * buf.gail_rewards[i])
                .collect();
            let (adv, ret) = compute_gae(
                &rewards,
                &buf.values[r.clone()],
                &buf.dones[r.clone()],
                buf.bootstrap[k],
                cfg.ppo.gamma,
                cfg.ppo.gae_lambda,
            );
            advantages[r.clone()].copy_from_slice(&adv);
            returns[r].copy_from_slice(&ret);
        }
        if advantages.iter().chain(&returns).any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite(format!(
                "advantages at iteration {iteration}"
            )));
        }
        let aux = (bc_s > 0.0).then_some(BcAux {
            demos,
            batch: cfg.bc.batch,
            strength: bc_s,
        });
        stats.ppo = ppo_update(
            &mut policy,
            &mut adam,
            &buf,
            &advantages,
            &returns,
            &hyper,
            cfg.ppo.epochs,
            cfg.ppo.minibatch,
            cfg.ppo.max_grad_norm,
            aux,
            &mut rng_ppo,
        )?;
        check_params(&policy, iteration)?;

        let env_steps = collector.env_steps;
        let new_eps = &collector.finished[episodes_before..];
        stats.env_steps = env_steps;
        stats.episodes = new_eps.len();
        stats.mean_episode_return = (!new_eps.is_empty())
            .then(|| new_eps.iter().map(|e| e.ret).sum::<f64>() / new_eps.len() as f64);
        log::info!(
            "iter {iteration} steps {env_steps} return {:?} entropy {:.3} bc {:.4} ({:.0}s)",
            stats.mean_episode_return,
            stats.ppo.entropy,
            stats.ppo.bc_loss,
            started.elapsed().as_secs_f64()
        );
        report.iterations.push(stats);

        while env_steps >= next_snapshot {
            let id = format!("{}@{next_snapshot}", cfg.run_id);
            if cfg.scenario == Scenario::SelfPlay {
                pool.push(id.clone(), Arc::new(policy.clone()));
            }
            report.snapshots.push(id);
            next_snapshot += cfg.selfplay.snapshot_every;
        }
        while env_steps >= next_ckpt {
            let mut ck = Checkpoint::new(&cfg.run_id, cfg.seed, env_steps, policy.clone());
            ck.discriminator = disc.clone();
            let path = run_dir.join(format!("ckpt_{env_steps:09}.json"));
            ck.save(&path)?;
            report.checkpoints.push(path.display().to_string());
            if cfg.eval_episodes > 0 {
                let src = PolicySource::Policy {
                    id: ck.id(),
                    params: Arc::new(policy.clone()),
                };
                let m = evaluate(
                    &arena,
                    &src,
                    &PolicySource::Expert,
                    cfg.eval_episodes,
                    derive_seed(cfg.seed, 5),
                )?;
                report.evaluations.push(EvalPoint {
                    env_steps,
                    mean_round_time_s: m.mean_round_time_s,
                    draw_rate: m.draw_rate,
                    win_rate_blue: m.win_rate_blue,
                });
            }
            next_ckpt += cfg.eval_every;
        }
        iteration += 1;
    }

    report.env_steps = collector.env_steps;
    report.episodes = collector.finished.clone();
    let mut ck = Checkpoint::new(&cfg.run_id, cfg.seed, collector.env_steps, policy);
    ck.discriminator = disc;
    let path = run_dir.join("final.json");
    ck.save(&path)?;
    report.final_checkpoint = path.display().to_string();
    write_json(&run_dir.join("report.json"), &report)?;
    Ok(TrainOutcome {
        checkpoint: ck,
        checkpoint_path: path,
        report,
    })
}

#[cfg(test)]
mod tests;
