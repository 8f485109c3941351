use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{shuffle, DemoSet};
use super::rollout::RolloutBuffer;
use super::TrainError;
use crate::nn::{bc_loss, clip_grad_norm, ppo_loss, AdamState, PolicyParams, PpoHyper, PpoSample};

/// BC auxiliary term mixed into every PPO minibatch.
pub struct BcAux<'a> {
    pub demos: &'a DemoSet,
    pub batch: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoUpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
    pub bc_loss: f64,
    pub grad_norm: f64,
    /// Mean probability ratio over the first minibatch, before any update.
    pub first_ratio: f64,
}

/// Advantage-normalised PPO epochs over the whole buffer.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut PolicyParams,
    adam: &mut AdamState,
    buf: &RolloutBuffer,
    advantages: &[f64],
    returns: &[f64],
    hyper: &PpoHyper,
    epochs: usize,
    minibatch: usize,
    max_grad_norm: f64,
    mut aux: Option<BcAux>,
    rng: &mut impl Rng,
) -> Result<PpoUpdateStats, TrainError> {
    let n = buf.len();
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt() + 1e-8;
    let samples: Vec<PpoSample> = (0..n)
        .map(|i| PpoSample {
            act: buf.acts[i],
            old_logprob: buf.logprobs[i],
            advantage: (advantages[i] - mean) / std,
            ret: returns[i],
        })
        .collect();
    let obs = buf.obs_matrix();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stats = PpoUpdateStats::default();
    let mut count = 0.0;
    if let Some(a) = &aux {
        if a.strength <= 0.0 || a.demos.is_empty() {
            aux = None;
        }
    }
    for _ in 0..epochs {
        shuffle(&mut idx, rng);
        for chunk in idx.chunks(minibatch) {
            let mut x = Array2::zeros((chunk.len(), buf.obs_dim));
            for (r, &i) in chunk.iter().enumerate() {
                x.row_mut(r).assign(&obs.row(i));
            }
            let batch: Vec<PpoSample> = chunk.iter().map(|&i| samples[i]).collect();
            let cache = policy.net.forward_cached(x.view())?;
            let (s, dout) = ppo_loss(cache.output().view(), &batch, hyper)?;
            if !s.loss.is_finite() {
                return Err(TrainError::NonFinite(format!("PPO loss {s:?}")));
            }
            let mut grads = policy.net.backward(&cache, dout.view())?;
            if let Some(a) = &aux {
                let di = a.demos.sample_indices(a.batch, rng);
                let (dx, dacts) = a.demos.gather(&di);
                let dcache = policy.net.forward_cached(dx.view())?;
                let (l, mut dd) = bc_loss(dcache.output().view(), &dacts)?;
                if !l.is_finite() {
                    return Err(TrainError::NonFinite(format!("BC loss {l}")));
                }
                dd *= a.strength;
                policy.net.backward_into(&dcache, dd.view(), &mut grads)?;
                stats.bc_loss += l;
            }
            stats.grad_norm += clip_grad_norm(&mut grads, max_grad_norm);
            if count == 0.0 {
                stats.first_ratio = s.mean_ratio;
            }
            adam.update(&mut policy.net.params, &grads)?;
            stats.policy_loss += s.policy_loss;
            stats.value_loss += s.value_loss;
            stats.entropy += s.entropy;
            stats.clip_frac += s.clip_frac;
            stats.approx_kl += s.approx_kl;
            count += 1.0;
        }
    }
    for v in [
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.clip_frac,
        &mut stats.approx_kl,
        &mut stats.bc_loss,
        &mut stats.grad_norm,
    ] {
        *v /= count;
    }
    Ok(stats)
}
