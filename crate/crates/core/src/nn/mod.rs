//! Small dense networks with hand-derived gradients.
//!
//! Parameters live in one flat `Vec<f64>`; layer `l` stores its weight
//! matrix row-major as `out × in`, followed by its `out` biases. Hidden
//! layers use tanh, the last layer is linear.

mod adam;
mod checkpoint;
mod dist;
mod loss;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, CheckpointError, CKPT_FORMAT};
pub use dist::{
    action_logprob, branch_entropy, branch_log_probs, greedy_action, sample_action, Sampled,
};
pub use loss::{bc_loss, bce_loss, ppo_loss, PpoHyper, PpoSample, PpoStats, D_MAX, D_MIN};
pub use mlp::{ForwardCache, Mlp};

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Action, LOGITS};
use crate::error::ContractError;

pub const POLICY_HIDDEN: usize = 128;
pub const DISC_HIDDEN: usize = 64;
/// Policy output width: 8 branch logits then the value estimate.
pub const POLICY_OUT: usize = LOGITS + 1;
pub const VALUE_COL: usize = LOGITS;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },
    #[error(transparent)]
    Contract(#[from] ContractError),
}

/// Actor-critic network: tanh trunk `obs → 128 → 128`, then one linear
/// layer producing the three branch heads and the value head side by side
/// (columns 0..3, 3..6, 6..8 and 8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub net: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOut {
    pub logits: [f64; LOGITS],
    pub value: f64,
}

impl PolicyParams {
    pub fn init(obs_dim: usize, seed: u64) -> Result<Self, ContractError> {
        if obs_dim == 0 {
            return Err(ContractError::new("obs_dim must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            net: Mlp::xavier(
                &[obs_dim, POLICY_HIDDEN, POLICY_HIDDEN, POLICY_OUT],
                &mut rng,
            ),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOut, NnError> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row view");
        let out = self.forward_batch(x)?;
        let row = out.row(0);
        Ok(PolicyOut {
            logits: std::array::from_fn(|i| row[i]),
            value: row[VALUE_COL],
        })
    }

    /// Rows of `[logits.., value]`, one per input row.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.net.forward(x)
    }

    pub fn act(
        &self,
        obs: &[f64],
        greedy: bool,
        rng: &mut impl rand::Rng,
    ) -> Result<Action, NnError> {
        let out = self.forward(obs)?;
        Ok(if greedy {
            greedy_action(&out.logits)
        } else {
            sample_action(&out.logits, rng).action
        })
    }
}

/// Discriminator `obs ++ one_hot(act) → 64 → 64 → 1` with a sigmoid output.
/// The last layer starts at zero so a fresh discriminator outputs 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    pub net: Mlp,
}

impl DiscriminatorParams {
    pub fn init(obs_dim: usize, seed: u64) -> Result<Self, ContractError> {
        if obs_dim == 0 {
            return Err(ContractError::new("obs_dim must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::xavier(&[obs_dim + LOGITS, DISC_HIDDEN, DISC_HIDDEN, 1], &mut rng);
        net.zero_layer(2);
        Ok(Self { net })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim() - LOGITS
    }

    /// Writes `obs ++ one_hot(act)` into `row`.
    pub fn encode(obs: &[f64], act: Action, row: &mut [f64]) {
        let n = obs.len();
        row[..n].copy_from_slice(obs);
        row[n..n + LOGITS].copy_from_slice(&act.one_hot());
    }

    /// Pre-sigmoid scores for encoded rows.
    pub fn logits_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.net.forward(x)
    }

    /// Clamped probability that the pair came from the expert.
    pub fn prob(&self, obs: &[f64], act: Action) -> Result<f64, NnError> {
        let mut row = vec![0.0; obs.len() + LOGITS];
        Self::encode(obs, act, &mut row);
        let x = ArrayView2::from_shape((1, row.len()), &row).expect("row view");
        Ok(clamped_sigmoid(self.logits_batch(x)?[[0, 0]]))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn clamped_sigmoid(z: f64) -> f64 {
    sigmoid(z).clamp(D_MIN, D_MAX)
}

/// Scales `grads` in place so its L2 norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
