use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expert::scripted_expert;
use crate::action::Action;
use crate::engine::{Team, WorldState};
use crate::nn::{greedy_action, sample_action, Checkpoint, CheckpointError, PolicyParams};
use crate::perception::{observe_into, rays_for_dim, ObsConfig};

/// Anything that can pick an action for a seat.
pub trait Controller: Send {
    fn act(&mut self, w: &WorldState, agent: usize) -> Action;
}

pub struct ExpertController;

impl Controller for ExpertController {
    fn act(&mut self, w: &WorldState, agent: usize) -> Action {
        scripted_expert(w, agent)
    }
}

/// Uniform over every branch.
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn act(&mut self, _w: &WorldState, _agent: usize) -> Action {
        Action {
            branches: [
                self.rng.random_range(0..3),
                self.rng.random_range(0..3),
                self.rng.random_range(0..2),
            ],
        }
    }
}

pub struct PolicyController {
    params: Arc<PolicyParams>,
    cfg: ObsConfig,
    greedy: bool,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
}

impl PolicyController {
    pub fn new(params: Arc<PolicyParams>, greedy: bool, seed: u64) -> Self {
        let dim = params.obs_dim();
        let cfg = ObsConfig {
            rays: rays_for_dim(dim).expect("policy obs_dim follows the layout"),
            ..ObsConfig::default()
        };
        Self {
            params,
            cfg,
            greedy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            obs: vec![0.0; dim],
        }
    }
}

impl Controller for PolicyController {
    fn act(&mut self, w: &WorldState, agent: usize) -> Action {
        observe_into(w, agent, &self.cfg, &mut self.obs);
        let local = match self.params.forward(&self.obs) {
            Ok(out) if self.greedy => greedy_action(&out.logits),
            Ok(out) => sample_action(&out.logits, &mut self.rng).action,
            Err(e) => {
                log::error!("policy forward failed for agent {agent}: {e}");
                Action::NOOP
            }
        };
        self.cfg.frame_action(Team::of_player(agent), local)
    }
}

/// Where a team's actions come from.
#[derive(Debug, Clone)]
pub enum PolicySource {
    Expert,
    Random,
    Policy {
        id: String,
        params: Arc<PolicyParams>,
    },
}

impl PolicySource {
    /// `expert`/`scripted`, `random`, or a checkpoint path.
    pub fn parse(s: &str) -> Result<Self, CheckpointError> {
        match s {
            "expert" | "scripted" => Ok(Self::Expert),
            "random" => Ok(Self::Random),
            path => Self::from_checkpoint(Path::new(path)),
        }
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self, CheckpointError> {
        let ck = Checkpoint::load(path)?;
        if rays_for_dim(ck.obs_dim).is_none() {
            return Err(CheckpointError::Format {
                path: path.to_path_buf(),
                msg: format!(
                    "obs_dim {} does not follow the observation layout",
                    ck.obs_dim
                ),
            });
        }
        Ok(Self::Policy {
            id: ck.id(),
            params: Arc::new(ck.policy),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Self::Expert => "expert".into(),
            Self::Random => "random".into(),
            Self::Policy { id, .. } => id.clone(),
        }
    }

    /// Controller for one episode; checkpoints act greedily.
    pub fn controller(&self, seed: u64) -> Box<dyn Controller> {
        match self {
            Self::Expert => Box::new(ExpertController),
            Self::Random => Box::new(RandomController::new(seed)),
            Self::Policy { params, .. } => {
                Box::new(PolicyController::new(params.clone(), true, seed))
            }
        }
    }
}
