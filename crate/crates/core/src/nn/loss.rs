//! Loss heads. Each returns the mean-reduced scalar loss and its gradient
//! with respect to the network output, ready for [`super::Mlp::backward`].

use ndarray::{Array2, ArrayView2};

use super::dist::branch_log_probs;
use super::{sigmoid, VALUE_COL};
use crate::action::{Action, BRANCHES, BRANCH_OFFSETS, LOGITS};
use crate::error::ContractError;

pub const D_MIN: f64 = 1e-7;
pub const D_MAX: f64 = 1.0 - 1e-7;

fn check_rows(out: &ArrayView2<f64>, n: usize, min_cols: usize) -> Result<(), ContractError> {
    if out.nrows() != n || out.ncols() < min_cols || n == 0 {
        return Err(ContractError::new(format!(
            "batch shape mismatch: output {:?}, {n} targets",
            out.dim()
        )));
    }
    Ok(())
}

/// Sum over branches of the cross-entropy of the demonstrated action.
pub fn bc_loss(out: ArrayView2<f64>, acts: &[Action]) -> Result<(f64, Array2<f64>), ContractError> {
    check_rows(&out, acts.len(), LOGITS)?;
    let n = acts.len() as f64;
    let mut grad = Array2::zeros(out.dim());
    let mut loss = 0.0;
    for (i, act) in acts.iter().enumerate() {
        let row = out.row(i);
        let z: Vec<f64> = row.iter().take(LOGITS).cloned().collect();
        let lp = branch_log_probs(&z);
        for b in 0..3 {
            let o = BRANCH_OFFSETS[b];
            let a = act.branches[b] as usize;
            loss -= lp[o + a];
            for j in 0..BRANCHES[b] {
                let target = if j == a { 1.0 } else { 0.0 };
                grad[[i, o + j]] = (lp[o + j].exp() - target) / n;
            }
        }
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoSample {
    pub act: Action,
    pub old_logprob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoHyper {
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoStats {
    pub loss: f64,
    pub policy_loss: f64,
    /// Policy loss without clipping, for the ratio identity check.
    pub unclipped_policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub mean_ratio: f64,
    pub approx_kl: f64,
}

/// Clipped surrogate + value MSE − entropy bonus, all mean-reduced.
pub fn ppo_loss(
    out: ArrayView2<f64>,
    batch: &[PpoSample],
    h: &PpoHyper,
) -> Result<(PpoStats, Array2<f64>), ContractError> {
    check_rows(&out, batch.len(), LOGITS + 1)?;
    let n = batch.len() as f64;
    let mut grad = Array2::zeros(out.dim());
    let mut s = PpoStats::default();
    for (i, smp) in batch.iter().enumerate() {
        let row = out.row(i);
        let z: Vec<f64> = row.iter().take(LOGITS).cloned().collect();
        let lp = branch_log_probs(&z);
        let logp: f64 = (0..3)
            .map(|b| lp[BRANCH_OFFSETS[b] + smp.act.branches[b] as usize])
            .sum();
        let ratio = (logp - smp.old_logprob).exp();
        let a = smp.advantage;
        let clipped = ratio.clamp(1.0 - h.clip_eps, 1.0 + h.clip_eps);
        let (surr1, surr2) = (ratio * a, clipped * a);
        // d(min)/d logp: through the unclipped term when it is the minimum
        let g_logp = if surr1 <= surr2 { a * ratio } else { 0.0 };
        if surr2 < surr1 {
            s.clip_frac += 1.0;
        }
        s.policy_loss -= surr1.min(surr2);
        s.unclipped_policy_loss -= surr1;
        s.mean_ratio += ratio;
        s.approx_kl += smp.old_logprob - logp;

        for b in 0..3 {
            let o = BRANCH_OFFSETS[b];
            let hb: f64 = -(0..BRANCHES[b])
                .map(|j| lp[o + j].exp() * lp[o + j])
                .sum::<f64>();
            s.entropy += hb;
            for j in 0..BRANCHES[b] {
                let p = lp[o + j].exp();
                let onehot = if j == smp.act.branches[b] as usize {
                    1.0
                } else {
                    0.0
                };
                let d_ent = -p * (lp[o + j] + hb);
                grad[[i, o + j]] = (-g_logp * (onehot - p) - h.entropy_coef * d_ent) / n;
            }
        }
        let v = row[VALUE_COL];
        s.value_loss += (v - smp.ret).powi(2);
        grad[[i, VALUE_COL]] = 2.0 * h.value_coef * (v - smp.ret) / n;
    }
    s.policy_loss /= n;
    s.unclipped_policy_loss /= n;
    s.value_loss /= n;
    s.entropy /= n;
    s.clip_frac /= n;
    s.mean_ratio /= n;
    s.approx_kl /= n;
    s.loss = s.policy_loss + h.value_coef * s.value_loss - h.entropy_coef * s.entropy;
    Ok((s, grad))
}

/// Binary cross-entropy on pre-sigmoid scores (`N × 1`) against labels in
/// {0, 1}, with the probability clamped to `[D_MIN, D_MAX]`. Returns the
/// loss, the accuracy at threshold 0.5 and the score gradient.
pub fn bce_loss(
    z: ArrayView2<f64>,
    labels: &[f64],
) -> Result<(f64, f64, Array2<f64>), ContractError> {
    check_rows(&z, labels.len(), 1)?;
    let n = labels.len() as f64;
    let mut grad = Array2::zeros(z.dim());
    let (mut loss, mut correct) = (0.0, 0.0);
    for (i, &y) in labels.iter().enumerate() {
        let s = sigmoid(z[[i, 0]]);
        let d = s.clamp(D_MIN, D_MAX);
        loss -= y * d.ln() + (1.0 - y) * (1.0 - d).ln();
        if (d >= 0.5) == (y >= 0.5) {
            correct += 1.0;
        }
        if s > D_MIN && s < D_MAX {
            grad[[i, 0]] = (s - y) / n;
        }
    }
    Ok((loss / n, correct / n, grad))
}
