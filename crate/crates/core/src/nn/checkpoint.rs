use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DiscriminatorParams, PolicyParams, DISC_HIDDEN, POLICY_HIDDEN, POLICY_OUT};
use crate::action::LOGITS;
use crate::perception::OBS_LAYOUT;

pub const CKPT_FORMAT: &str = "ckptv1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

/// Single-file JSON checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub obs_layout: String,
    pub obs_dim: usize,
    pub run_id: String,
    pub seed: u64,
    /// Ids of the checkpoints this one descends from, oldest first.
    #[serde(default)]
    pub lineage: Vec<String>,
    pub step: u64,
    pub policy: PolicyParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator: Option<DiscriminatorParams>,
}

impl Checkpoint {
    pub fn new(run_id: impl Into<String>, seed: u64, step: u64, policy: PolicyParams) -> Self {
        Self {
            format: CKPT_FORMAT.to_string(),
            obs_layout: OBS_LAYOUT.to_string(),
            obs_dim: policy.obs_dim(),
            run_id: run_id.into(),
            seed,
            lineage: Vec::new(),
            step,
            policy,
            discriminator: None,
        }
    }

    pub fn id(&self) -> String {
        format!("{}@{}", self.run_id, self.step)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let text = serde_json::to_string(self).map_err(|e| io(std::io::Error::other(e)))?;
        // write then rename so readers never see a partial file
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let fmt = |msg: String| CheckpointError::Format {
            path: path.to_path_buf(),
            msg,
        };
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| fmt(e.to_string()))?;
        ck.problems().map_or(Ok(ck), |m| Err(fmt(m)))
    }

    fn problems(&self) -> Option<String> {
        if self.format != CKPT_FORMAT {
            return Some(format!("unsupported format {:?}", self.format));
        }
        if self.obs_layout != OBS_LAYOUT {
            return Some(format!(
                "observation layout {:?} != {OBS_LAYOUT}",
                self.obs_layout
            ));
        }
        let net = &self.policy.net;
        if net.sizes != [self.obs_dim, POLICY_HIDDEN, POLICY_HIDDEN, POLICY_OUT] {
            return Some(format!("policy shape {:?} inconsistent", net.sizes));
        }
        if net.params.len() != super::Mlp::zeros(&net.sizes).num_params() {
            return Some("policy parameter count inconsistent".into());
        }
        if let Some(d) = &self.discriminator {
            if d.net.sizes != [self.obs_dim + LOGITS, DISC_HIDDEN, DISC_HIDDEN, 1]
                || d.net.params.len() != super::Mlp::zeros(&d.net.sizes).num_params()
            {
                return Some("discriminator shape inconsistent".into());
            }
        }
        if !net.params.iter().all(|v| v.is_finite()) {
            return Some("non-finite policy parameter".into());
        }
        None
    }

    /// Errors unless the checkpoint accepts observations of `obs_dim`.
    pub fn check_obs_dim(&self, obs_dim: usize) -> Result<(), String> {
        if self.obs_dim != obs_dim {
            return Err(format!(
                "checkpoint {} expects obs_dim {}, environment gives {obs_dim}",
                self.id(),
                self.obs_dim
            ));
        }
        Ok(())
    }
}
