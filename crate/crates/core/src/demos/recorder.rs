use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{write_line, DemoError, DemoHeader, DemoStep};
use crate::action::Action;
use crate::error::ContractError;

/// Append-only writer for one agent's demo file.
///
/// Every step is flushed before `record_step` returns, so a crash loses at
/// most the step being written.
pub struct DemoRecorder {
    path: PathBuf,
    writer: BufWriter<File>,
    obs_dim: usize,
    next_t: u64,
    steps: u64,
}

impl DemoRecorder {
    pub fn create(path: &Path, header: &DemoHeader) -> Result<Self, DemoError> {
        let file = File::create(path).map_err(|e| DemoError::io(path, e))?;
        let mut writer = BufWriter::new(file);
        write_line(&mut writer, header).map_err(|e| DemoError::io(path, e))?;
        writer.flush().map_err(|e| DemoError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
            obs_dim: header.obs_dim,
            next_t: 0,
            steps: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Appends a step with `t` one past the previous step.
    pub fn record_step(
        &mut self,
        obs: &[f64],
        act: Action,
        rew: f64,
        done: bool,
    ) -> Result<(), DemoError> {
        self.record_step_at(self.next_t, obs, act, rew, done)
    }

    /// Appends a step with an explicit session-level step index.
    pub fn record_step_at(
        &mut self,
        t: u64,
        obs: &[f64],
        act: Action,
        rew: f64,
        done: bool,
    ) -> Result<(), DemoError> {
        if obs.len() != self.obs_dim {
            return Err(ContractError::new(format!(
                "observation length mismatch: expected {}, got {}",
                self.obs_dim,
                obs.len()
            ))
            .into());
        }
        if self.steps > 0 && t < self.next_t {
            return Err(ContractError::new(format!(
                "step index {t} not after previous {}",
                self.next_t - 1
            ))
            .into());
        }
        let step = DemoStep {
            t,
            obs: obs.to_vec(),
            act,
            rew,
            done,
        };
        write_line(&mut self.writer, &step).map_err(|e| DemoError::io(&self.path, e))?;
        self.writer
            .flush()
            .map_err(|e| DemoError::io(&self.path, e))?;
        self.next_t = t + 1;
        self.steps += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, DemoError> {
        self.writer
            .flush()
            .map_err(|e| DemoError::io(&self.path, e))?;
        Ok(self.path)
    }
}
