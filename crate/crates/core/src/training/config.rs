use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::engine::ArenaConfig;
use crate::perception::RewardSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "GAIL_PPO")]
    GailPpo,
    #[serde(rename = "PPO")]
    Ppo,
    Combo {
        bc_strength: f64,
        gail_strength: f64,
    },
}

impl Algorithm {
    pub fn uses_ppo(self) -> bool {
        !matches!(self, Algorithm::Bc)
    }

    /// Initial (bc, gail) strengths.
    pub fn strengths(self) -> (f64, f64) {
        match self {
            Algorithm::Bc => (1.0, 0.0),
            Algorithm::GailPpo => (0.0, 1.0),
            Algorithm::Ppo => (0.0, 0.0),
            Algorithm::Combo {
                bc_strength,
                gail_strength,
            } => (bc_strength, gail_strength),
        }
    }

    pub fn needs_demos(self) -> bool {
        let (bc, gail) = self.strengths();
        bc > 0.0 || gail > 0.0
    }

    /// Whether the imitation strengths decay to zero over training.
    pub fn anneals(self) -> bool {
        matches!(self, Algorithm::Combo { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Full game; the learner plays one team against self-play snapshots.
    #[default]
    SelfPlay,
    /// Agent 0 alone fetches the enemy flag; everyone else idles.
    FetchFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub horizon: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 3,
            minibatch: 512,
            horizon: 2048,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            batch: 256,
            epochs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GailConfig {
    pub lr: f64,
    pub batch: usize,
    pub reward_scale: f64,
    pub updates_per_iter: usize,
}

impl Default for GailConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 256,
            reward_scale: 1.0,
            updates_per_iter: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfPlayConfig {
    pub snapshot_every: u64,
    pub pool_size: usize,
    pub opponent_latest_prob: f64,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        Self {
            snapshot_every: 50_000,
            pool_size: 10,
            opponent_latest_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub demo_paths: Vec<PathBuf>,
    pub max_env_steps: u64,
    pub ppo: PpoConfig,
    pub bc: BcConfig,
    pub gail: GailConfig,
    pub selfplay: SelfPlayConfig,
    pub eval_every: u64,
    pub checkpoint_dir: PathBuf,
    pub scenario: Scenario,
    /// Arena override; defaults to the scenario's arena.
    pub arena: Option<ArenaConfig>,
    pub reward: RewardSpec,
    /// Greedy episodes against the scripted expert at every checkpoint.
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            seed: 0,
            algorithm: Algorithm::Combo {
                bc_strength: 0.5,
                gail_strength: 0.1,
            },
            demo_paths: Vec::new(),
            max_env_steps: 500_000,
            ppo: PpoConfig::default(),
            bc: BcConfig::default(),
            gail: GailConfig::default(),
            selfplay: SelfPlayConfig::default(),
            eval_every: 50_000,
            checkpoint_dir: PathBuf::from("checkpoints"),
            scenario: Scenario::SelfPlay,
            arena: None,
            reward: RewardSpec::default(),
            eval_episodes: 0,
        }
    }
}

impl TrainConfig {
    pub fn arena(&self) -> ArenaConfig {
        self.arena.clone().unwrap_or_else(|| match self.scenario {
            Scenario::SelfPlay => ArenaConfig::default(),
            Scenario::FetchFlag => ArenaConfig::fetch_flag_curriculum(),
        })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.checkpoint_dir.join(&self.run_id)
    }

    /// Reads a JSON config and applies `key.path=value` overrides to leaf keys.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        let cfg: TrainConfig = serde_json::from_str(&text)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        let cfg = cfg.with_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, TrainError> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("override {o:?} is not key=value")))?;
            let mut slot = &mut value;
            for part in key.split('.') {
                slot = slot
                    .get_mut(part)
                    .ok_or_else(|| TrainError::Config(format!("unknown config key {key:?}")))?;
            }
            if slot.is_object() {
                return Err(TrainError::Config(format!("{key:?} is not a leaf key")));
            }
            *slot =
                serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
        }
        serde_json::from_value(value).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        let rates = [
            ("ppo.lr", self.ppo.lr),
            ("ppo.gamma", self.ppo.gamma),
            ("ppo.gae_lambda", self.ppo.gae_lambda),
            ("ppo.entropy_coef", self.ppo.entropy_coef),
            ("ppo.value_coef", self.ppo.value_coef),
            ("ppo.max_grad_norm", self.ppo.max_grad_norm),
            ("bc.lr", self.bc.lr),
            ("gail.lr", self.gail.lr),
            ("gail.reward_scale", self.gail.reward_scale),
        ];
        for (k, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        if !(self.ppo.clip_eps > 0.0 && self.ppo.clip_eps < 1.0) {
            return bad(format!(
                "ppo.clip_eps must be in (0, 1), got {}",
                self.ppo.clip_eps
            ));
        }
        if self.ppo.gamma > 1.0 || self.ppo.gae_lambda > 1.0 {
            return bad("ppo.gamma and ppo.gae_lambda must be at most 1".into());
        }
        let counts = [
            ("ppo.epochs", self.ppo.epochs),
            ("ppo.minibatch", self.ppo.minibatch),
            ("ppo.horizon", self.ppo.horizon),
            ("bc.batch", self.bc.batch),
            ("bc.epochs", self.bc.epochs),
            ("gail.batch", self.gail.batch),
            ("selfplay.pool_size", self.selfplay.pool_size),
        ];
        for (k, v) in counts {
            if v == 0 {
                return bad(format!("{k} must be positive"));
            }
        }
        if self.selfplay.snapshot_every == 0 || self.eval_every == 0 {
            return bad("selfplay.snapshot_every and eval_every must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.selfplay.opponent_latest_prob) {
            return bad("selfplay.opponent_latest_prob must be in [0, 1]".into());
        }
        let (bc, gail) = self.algorithm.strengths();
        if !(bc >= 0.0 && gail >= 0.0 && bc.is_finite() && gail.is_finite()) {
            return bad("imitation strengths must be non-negative".into());
        }
        if self.algorithm.needs_demos() && self.demo_paths.is_empty() {
            return bad(format!(
                "algorithm {:?} requires demo_paths",
                self.algorithm
            ));
        }
        if self.algorithm.uses_ppo() && self.max_env_steps == 0 {
            return bad("max_env_steps must be positive".into());
        }
        self.reward
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        self.arena()
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))
    }
}
