use rand::Rng;

use super::dataset::{shuffle, DemoSet};
use super::TrainError;
use crate::action::BRANCH_OFFSETS;
use crate::nn::{bc_loss, greedy_action, AdamState, PolicyParams};

/// One pass over `data` in shuffled minibatches; returns the mean loss.
pub fn bc_epoch(
    policy: &mut PolicyParams,
    adam: &mut AdamState,
    data: &DemoSet,
    batch: usize,
    rng: &mut impl Rng,
) -> Result<f64, TrainError> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    shuffle(&mut idx, rng);
    let (mut total, mut n) = (0.0, 0);
    for chunk in idx.chunks(batch) {
        total += bc_step(policy, adam, data, chunk)?;
        n += 1;
    }
    Ok(total / n.max(1) as f64)
}

/// One Adam step on the BC loss of the rows `idx`.
pub fn bc_step(
    policy: &mut PolicyParams,
    adam: &mut AdamState,
    data: &DemoSet,
    idx: &[usize],
) -> Result<f64, TrainError> {
    let (x, acts) = data.gather(idx);
    let cache = policy.net.forward_cached(x.view())?;
    let (loss, dout) = bc_loss(cache.output().view(), &acts)?;
    if !loss.is_finite() {
        return Err(TrainError::NonFinite(format!("BC loss {loss}")));
    }
    let grads = policy.net.backward(&cache, dout.view())?;
    adam.update(&mut policy.net.params, &grads)?;
    Ok(loss)
}

/// Mean BC loss over `data` without updating.
pub fn bc_eval_loss(policy: &PolicyParams, data: &DemoSet) -> Result<f64, TrainError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(4096) {
        let (x, acts) = data.gather(chunk);
        let out = policy.forward_batch(x.view())?;
        total += bc_loss(out.view(), &acts)?.0 * chunk.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Fraction of rows whose greedy branch choice matches the demonstration,
/// per branch.
pub fn branch_agreement(policy: &PolicyParams, data: &DemoSet) -> Result<[f64; 3], TrainError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut hits = [0usize; 3];
    for chunk in idx.chunks(4096) {
        let (x, acts) = data.gather(chunk);
        let out = policy.forward_batch(x.view())?;
        for (r, act) in acts.iter().enumerate() {
            let logits: Vec<f64> = out
                .row(r)
                .iter()
                .take(BRANCH_OFFSETS[2] + 2)
                .cloned()
                .collect();
            let g = greedy_action(&logits);
            for b in 0..3 {
                hits[b] += usize::from(g.branches[b] == act.branches[b]);
            }
        }
    }
    let n = data.len().max(1) as f64;
    Ok(hits.map(|h| h as f64 / n))
}
