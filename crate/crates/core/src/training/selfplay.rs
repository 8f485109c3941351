use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::nn::PolicyParams;

/// Bounded FIFO of past policy snapshots.
#[derive(Debug, Clone)]
pub struct SnapshotPool {
    pub pool_size: usize,
    pub latest_prob: f64,
    snapshots: VecDeque<(String, Arc<PolicyParams>)>,
}

/// Which policy an opponent pick resolved to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pick {
    Current,
    Snapshot(String),
}

impl SnapshotPool {
    pub fn new(pool_size: usize, latest_prob: f64) -> Self {
        Self {
            pool_size,
            latest_prob,
            snapshots: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.snapshots.iter().map(|(id, _)| id.clone()).collect()
    }

    /// Enqueues a snapshot, evicting the oldest beyond `pool_size`.
    pub fn push(&mut self, id: String, params: Arc<PolicyParams>) -> Option<String> {
        self.snapshots.push_back((id, params));
        if self.snapshots.len() > self.pool_size {
            self.snapshots.pop_front().map(|(id, _)| id)
        } else {
            None
        }
    }

    /// Current params with probability `latest_prob`, otherwise a uniform
    /// pick from the pool. An empty pool always yields the current params.
    pub fn pick(
        &self,
        current: &Arc<PolicyParams>,
        rng: &mut impl Rng,
    ) -> (Pick, Arc<PolicyParams>) {
        if self.snapshots.is_empty() || rng.random::<f64>() < self.latest_prob {
            return (Pick::Current, current.clone());
        }
        let (id, p) = &self.snapshots[rng.random_range(0..self.snapshots.len())];
        (Pick::Snapshot(id.clone()), p.clone())
    }
}
