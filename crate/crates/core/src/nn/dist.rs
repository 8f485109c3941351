use rand::Rng;

use crate::action::{Action, BRANCHES, BRANCH_OFFSETS, LOGITS};

/// Per-branch categorical sample together with its joint log-probability
/// and the summed branch entropies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampled {
    pub action: Action,
    pub logprob: f64,
    pub entropy: f64,
}

/// Log-softmax applied independently to each branch's logits.
pub fn branch_log_probs(logits: &[f64]) -> [f64; LOGITS] {
    let mut out = [0.0; LOGITS];
    for (b, &n) in BRANCHES.iter().enumerate() {
        let o = BRANCH_OFFSETS[b];
        let z = &logits[o..o + n];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for i in 0..n {
            out[o + i] = z[i] - lse;
        }
    }
    out
}

pub fn action_logprob(logits: &[f64], act: Action) -> f64 {
    let lp = branch_log_probs(logits);
    (0..3)
        .map(|b| lp[BRANCH_OFFSETS[b] + act.branches[b] as usize])
        .sum()
}

/// Sum of the three branch entropies.
pub fn branch_entropy(logits: &[f64]) -> f64 {
    let lp = branch_log_probs(logits);
    -lp.iter().map(|&l| l.exp() * l).sum::<f64>()
}

pub fn sample_action(logits: &[f64], rng: &mut impl Rng) -> Sampled {
    let lp = branch_log_probs(logits);
    let mut branches = [0u8; 3];
    for (b, &n) in BRANCHES.iter().enumerate() {
        let o = BRANCH_OFFSETS[b];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = n - 1;
        for i in 0..n {
            acc += lp[o + i].exp();
            if u < acc {
                pick = i;
                break;
            }
        }
        branches[b] = pick as u8;
    }
    let action = Action { branches };
    let logprob = (0..3)
        .map(|b| lp[BRANCH_OFFSETS[b] + branches[b] as usize])
        .sum();
    let entropy = -lp.iter().map(|&l| l.exp() * l).sum::<f64>();
    Sampled {
        action,
        logprob,
        entropy,
    }
}

/// Per-branch argmax; ties go to the lowest index.
pub fn greedy_action(logits: &[f64]) -> Action {
    let mut branches = [0u8; 3];
    for (b, &n) in BRANCHES.iter().enumerate() {
        let o = BRANCH_OFFSETS[b];
        let mut best = 0;
        for i in 1..n {
            if logits[o + i] > logits[o + best] {
                best = i;
            }
        }
        branches[b] = best as u8;
    }
    Action { branches }
}
