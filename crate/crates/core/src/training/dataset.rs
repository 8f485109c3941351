use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;

use super::TrainError;
use crate::action::Action;
use crate::demos::{list_demo_files, read_demo, DemoError, Trajectory};
use crate::perception::OBS_LAYOUT;

/// Flattened (observation, action) pairs from demonstrations. Observations
/// are kept in single precision to halve memory on large corpora.
#[derive(Debug, Clone, Default)]
pub struct DemoSet {
    pub obs_dim: usize,
    pub obs: Vec<f32>,
    pub acts: Vec<Action>,
}

/// Expands directories into the demo files they contain.
pub fn resolve_demo_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, TrainError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(list_demo_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

impl DemoSet {
    pub fn new(obs_dim: usize) -> Self {
        Self {
            obs_dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.acts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], act: Action) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        self.obs.extend(obs.iter().map(|&v| v as f32));
        self.acts.push(act);
    }

    pub fn add_trajectory(&mut self, path: &Path, t: &Trajectory) -> Result<(), TrainError> {
        if t.header.obs_layout != OBS_LAYOUT || t.header.obs_dim != self.obs_dim {
            return Err(DemoError::Format {
                path: path.to_path_buf(),
                line: 1,
                msg: format!(
                    "layout {} / obs_dim {} does not match {OBS_LAYOUT} / {}",
                    t.header.obs_layout, t.header.obs_dim, self.obs_dim
                ),
            }
            .into());
        }
        for s in &t.steps {
            self.push(&s.obs, s.act);
        }
        Ok(())
    }

    /// Loads every demo under `paths` (files or directories).
    pub fn load(paths: &[PathBuf], obs_dim: usize) -> Result<Self, TrainError> {
        let mut set = Self::new(obs_dim);
        for p in resolve_demo_paths(paths)? {
            let t = read_demo(&p)?;
            set.add_trajectory(&p, &t)?;
        }
        if set.is_empty() {
            return Err(TrainError::Config(
                "demo_paths contain no demo steps".into(),
            ));
        }
        log::info!("loaded {} demo steps", set.len());
        Ok(set)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    /// Copies rows `idx` into a double-precision matrix.
    pub fn gather(&self, idx: &[usize]) -> (Array2<f64>, Vec<Action>) {
        let mut x = Array2::zeros((idx.len(), self.obs_dim));
        for (r, &i) in idx.iter().enumerate() {
            for (dst, &src) in x.row_mut(r).iter_mut().zip(self.row(i)) {
                *dst = src as f64;
            }
        }
        (x, idx.iter().map(|&i| self.acts[i]).collect())
    }

    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.len())).collect()
    }

    /// Deterministic split: a shuffled `holdout` fraction goes to the second set.
    pub fn split(&self, holdout: f64, rng: &mut impl Rng) -> (DemoSet, DemoSet) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        shuffle(&mut idx, rng);
        let n_hold = ((self.len() as f64) * holdout).round() as usize;
        let mut train = DemoSet::new(self.obs_dim);
        let mut test = DemoSet::new(self.obs_dim);
        for (k, &i) in idx.iter().enumerate() {
            let row: Vec<f64> = self.row(i).iter().map(|&v| v as f64).collect();
            if k < n_hold {
                test.push(&row, self.acts[i]);
            } else {
                train.push(&row, self.acts[i]);
            }
        }
        (train, test)
    }
}

pub(crate) fn shuffle<T>(v: &mut [T], rng: &mut impl Rng) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}
