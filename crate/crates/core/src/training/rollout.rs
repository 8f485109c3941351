use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Scenario;
use crate::action::Action;
use crate::arena::scripted_expert;
use crate::engine::{ArenaConfig, EventKind, Team, WorldState, NUM_PLAYERS};
use crate::error::EngineError;
use crate::nn::{sample_action, NnError, PolicyParams, VALUE_COL};
use crate::perception::{compute_rewards, obs_dim, observe_into, ObsConfig, RewardSpec};

/// Per learner agent, per step; index `agent * horizon + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_agents: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub obs: Vec<f64>,
    pub acts: Vec<Action>,
    pub logprobs: Vec<f64>,
    pub values: Vec<f64>,
    pub env_rewards: Vec<f64>,
    pub gail_rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state after the last step, per agent.
    pub bootstrap: Vec<f64>,
}

impl RolloutBuffer {
    fn new(n_agents: usize, horizon: usize, obs_dim: usize) -> Self {
        let n = n_agents * horizon;
        Self {
            n_agents,
            horizon,
            obs_dim,
            obs: vec![0.0; n * obs_dim],
            acts: vec![Action::NOOP; n],
            logprobs: vec![0.0; n],
            values: vec![0.0; n],
            env_rewards: vec![0.0; n],
            gail_rewards: vec![0.0; n],
            dones: vec![false; n],
            bootstrap: vec![0.0; n_agents],
        }
    }

    pub fn len(&self) -> usize {
        self.acts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn obs_matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.obs_dim), &self.obs).expect("buffer shape")
    }

    /// Steps of one agent as a range of buffer indices.
    pub fn agent_range(&self, agent: usize) -> std::ops::Range<usize> {
        agent * self.horizon..(agent + 1) * self.horizon
    }
}

/// Who drives the non-learner seats.
#[derive(Debug, Clone)]
pub enum Opponent {
    /// Stands still.
    Idle,
    Expert,
    /// Sampled actions from a policy snapshot.
    Policy(Arc<PolicyParams>),
}

/// Finished episode as seen by the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    /// Environment step at which the episode ended.
    pub end_step: u64,
    /// Mean over learner agents of the undiscounted environment return.
    pub ret: f64,
    pub learner: Team,
    /// Winning team, `None` on a draw.
    pub winner: Option<Team>,
    pub ticks: u64,
}

/// A persistent environment that keeps its episode state between
/// collection calls.
pub struct Collector {
    pub scenario: Scenario,
    world: WorldState,
    cfg: ObsConfig,
    reward: RewardSpec,
    learner: Team,
    rng: ChaCha8Rng,
    ep_return: Vec<f64>,
    pub env_steps: u64,
    pub finished: Vec<EpisodeStat>,
    obs_dim: usize,
}

impl Collector {
    pub fn new(
        scenario: Scenario,
        arena: ArenaConfig,
        reward: RewardSpec,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let cfg = ObsConfig::default();
        let dim = obs_dim(&arena, cfg.rays)?;
        let world = WorldState::new(arena, seed)?;
        let n = Self::learner_count(scenario);
        Ok(Self {
            scenario,
            world,
            cfg,
            reward,
            learner: Team::Blue,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ac7105),
            ep_return: vec![0.0; n],
            env_steps: 0,
            finished: Vec::new(),
            obs_dim: dim,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn learner_count(scenario: Scenario) -> usize {
        match scenario {
            Scenario::SelfPlay => 3,
            Scenario::FetchFlag => 1,
        }
    }

    fn learner_agents(&self) -> Vec<usize> {
        match self.scenario {
            Scenario::SelfPlay => self.learner.players().collect(),
            Scenario::FetchFlag => vec![0],
        }
    }

    fn batch_forward(
        params: &PolicyParams,
        world: &WorldState,
        agents: &[usize],
        cfg: &ObsConfig,
        dim: usize,
    ) -> Result<(Array2<f64>, Array2<f64>), NnError> {
        let mut x = Array2::zeros((agents.len(), dim));
        for (r, &a) in agents.iter().enumerate() {
            observe_into(world, a, cfg, x.row_mut(r).into_slice().expect("row-major"));
        }
        let out = params.forward_batch(x.view())?;
        Ok((x, out))
    }

    /// Runs `horizon` engine ticks, recording every learner agent.
    pub fn collect(
        &mut self,
        policy: &PolicyParams,
        opponent: &Opponent,
        horizon: usize,
    ) -> Result<RolloutBuffer, super::TrainError> {
        let n = Self::learner_count(self.scenario);
        let dim = self.obs_dim;
        let mut buf = RolloutBuffer::new(n, horizon, dim);
        let mut actions = [Action::NOOP; NUM_PLAYERS];
        for t in 0..horizon {
            let learners = self.learner_agents();
            let (x, out) = Self::batch_forward(policy, &self.world, &learners, &self.cfg, dim)?;
            actions.fill(Action::NOOP);
            for (k, &a) in learners.iter().enumerate() {
                let i = k * horizon + t;
                let row = out.row(k);
                let logits: Vec<f64> = row.iter().take(VALUE_COL).cloned().collect();
                let s = sample_action(&logits, &mut self.rng);
                actions[a] = self.cfg.frame_action(Team::of_player(a), s.action);
                buf.obs[i * dim..(i + 1) * dim]
                    .copy_from_slice(x.row(k).as_slice().expect("row-major"));
                buf.acts[i] = s.action;
                buf.logprobs[i] = s.logprob;
                buf.values[i] = row[VALUE_COL];
            }
            if self.scenario == Scenario::SelfPlay {
                let others: Vec<usize> = self.learner.other().players().collect();
                match opponent {
                    Opponent::Idle => {}
                    Opponent::Expert => {
                        for &a in &others {
                            actions[a] = scripted_expert(&self.world, a);
                        }
                    }
                    Opponent::Policy(p) => {
                        let (_, o) = Self::batch_forward(p, &self.world, &others, &self.cfg, dim)?;
                        for (k, &a) in others.iter().enumerate() {
                            let logits: Vec<f64> =
                                o.row(k).iter().take(VALUE_COL).cloned().collect();
                            let s = sample_action(&logits, &mut self.rng).action;
                            actions[a] = self.cfg.frame_action(Team::of_player(a), s);
                        }
                    }
                }
            }
            let events = self.world.step(&actions)?;
            self.env_steps += 1;
            let rew = compute_rewards(&events, &self.reward);
            let done = events
                .iter()
                .any(|e| matches!(e.kind, EventKind::RoundEnd(_)));
            for (k, &a) in learners.iter().enumerate() {
                let i = k * horizon + t;
                buf.env_rewards[i] = rew[a];
                buf.dones[i] = done;
                self.ep_return[k] += rew[a];
            }
            if done {
                self.finish_episode();
            }
        }
        let learners = self.learner_agents();
        let (_, out) = Self::batch_forward(policy, &self.world, &learners, &self.cfg, dim)?;
        for k in 0..n {
            buf.bootstrap[k] = out[[k, VALUE_COL]];
        }
        Ok(buf)
    }

    fn finish_episode(&mut self) {
        let winner = match self.world.outcome {
            crate::engine::Outcome::Won { team, .. } => Some(team),
            _ => None,
        };
        let ret = self.ep_return.iter().sum::<f64>() / self.ep_return.len() as f64;
        self.finished.push(EpisodeStat {
            end_step: self.env_steps,
            ret,
            learner: self.learner,
            winner,
            ticks: self.world.tick,
        });
        self.ep_return.fill(0.0);
        self.world.reset_round().expect("round just ended");
        if self.scenario == Scenario::SelfPlay {
            self.learner = self.learner.other();
        }
    }
}

/// One-shot rollout from a fresh environment.
pub fn collect_rollouts(
    policy: &PolicyParams,
    opponent: &Opponent,
    scenario: Scenario,
    arena: ArenaConfig,
    horizon: usize,
    seed: u64,
) -> Result<RolloutBuffer, super::TrainError> {
    let mut c = Collector::new(scenario, arena, RewardSpec::default(), seed)?;
    c.collect(policy, opponent, horizon)
}
