use ndarray::Array2;

use super::TrainError;
use crate::action::{Action, LOGITS};
use crate::error::ContractError;
use crate::nn::{bce_loss, clamped_sigmoid, AdamState, DiscriminatorParams};

/// A batch of (observation, action) pairs in double precision.
pub struct PairBatch {
    pub obs: Array2<f64>,
    pub acts: Vec<Action>,
}

fn encode(d: &DiscriminatorParams, b: &PairBatch, out: &mut Array2<f64>, offset: usize) {
    let dim = d.obs_dim();
    for (r, act) in b.acts.iter().enumerate() {
        let mut row = out.row_mut(offset + r);
        let slice = row.as_slice_mut().expect("row-major");
        slice[..dim].copy_from_slice(b.obs.row(r).as_slice().expect("row-major"));
        slice[dim..dim + LOGITS].copy_from_slice(&act.one_hot());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GailStep {
    pub loss: f64,
    pub accuracy: f64,
}

/// One Adam step of the discriminator: expert pairs labelled 1, policy
/// pairs labelled 0. Loss and accuracy are measured before the step.
pub fn gail_update(
    d: &mut DiscriminatorParams,
    adam: &mut AdamState,
    expert: &PairBatch,
    policy: &PairBatch,
) -> Result<GailStep, TrainError> {
    let dim = d.obs_dim();
    for b in [expert, policy] {
        if b.acts.is_empty() || b.obs.ncols() != dim || b.obs.nrows() != b.acts.len() {
            return Err(ContractError::new(format!(
                "discriminator batch shape {:?} does not match obs_dim {dim}",
                b.obs.dim()
            ))
            .into());
        }
    }
    let (ne, np) = (expert.acts.len(), policy.acts.len());
    let mut x = Array2::zeros((ne + np, dim + LOGITS));
    encode(d, expert, &mut x, 0);
    encode(d, policy, &mut x, ne);
    let labels: Vec<f64> = (0..ne + np)
        .map(|i| if i < ne { 1.0 } else { 0.0 })
        .collect();
    let cache = d.net.forward_cached(x.view())?;
    let (loss, accuracy, dz) = bce_loss(cache.output().view(), &labels)?;
    if !loss.is_finite() {
        return Err(TrainError::NonFinite(format!("discriminator loss {loss}")));
    }
    let grads = d.net.backward(&cache, dz.view())?;
    adam.update(&mut d.net.params, &grads)?;
    Ok(GailStep { loss, accuracy })
}

/// Accuracy at threshold 0.5 on labelled pairs, without updating.
pub fn discriminator_accuracy(
    d: &DiscriminatorParams,
    expert: &PairBatch,
    policy: &PairBatch,
) -> Result<f64, TrainError> {
    let probs_e = discriminator_probs(d, expert)?;
    let probs_p = discriminator_probs(d, policy)?;
    let correct = probs_e.iter().filter(|&&p| p >= 0.5).count()
        + probs_p.iter().filter(|&&p| p < 0.5).count();
    Ok(correct as f64 / (probs_e.len() + probs_p.len()) as f64)
}

pub fn discriminator_probs(d: &DiscriminatorParams, b: &PairBatch) -> Result<Vec<f64>, TrainError> {
    let mut x = Array2::zeros((b.acts.len(), d.obs_dim() + LOGITS));
    encode(d, b, &mut x, 0);
    let z = d.logits_batch(x.view())?;
    Ok(z.column(0).iter().map(|&v| clamped_sigmoid(v)).collect())
}

/// `−ln(1 − D)` with D clamped, times `scale`.
pub fn gail_reward_from_prob(prob: f64, scale: f64) -> f64 {
    let p = prob.clamp(crate::nn::D_MIN, crate::nn::D_MAX);
    -(1.0 - p).ln() * scale
}

pub fn gail_reward(
    d: &DiscriminatorParams,
    obs: &[f64],
    act: Action,
    scale: f64,
) -> Result<f64, TrainError> {
    Ok(gail_reward_from_prob(d.prob(obs, act)?, scale))
}
