use std::path::Path;

use serde::Serialize;

use super::{open_lines, DemoHeader, DemoStep};
use crate::perception::STATE_DIM;

/// Index of the round-time fraction inside an observation.
const TIME_INDEX: usize = STATE_DIM - 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub steps: usize,
    pub duration_s: f64,
    pub rounds: usize,
    pub problems: Vec<String>,
}

/// Streams the file and lists every problem found. Never fails; an
/// unreadable file is itself a problem.
pub fn validate_demo(path: &Path) -> ValidationReport {
    let mut report = ValidationReport {
        ok: false,
        steps: 0,
        duration_s: 0.0,
        rounds: 0,
        problems: Vec::new(),
    };
    let problems = &mut report.problems;
    let lines = match open_lines(path) {
        Ok(l) => l,
        Err(e) => {
            problems.push(e.to_string());
            return report;
        }
    };
    let mut header: Option<DemoHeader> = None;
    let mut prev: Option<(u64, f64, bool)> = None;
    for (i, line) in lines.enumerate() {
        let lineno = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                problems.push(format!("line {lineno}: read error: {e}"));
                break;
            }
        };
        if lineno == 1 {
            match serde_json::from_str::<DemoHeader>(&line) {
                Ok(h) => {
                    problems.extend(h.problems().into_iter().map(|p| format!("line 1: {p}")));
                    header = Some(h);
                }
                Err(e) => {
                    problems.push(format!("line 1: bad header: {e}"));
                    return report;
                }
            }
            continue;
        }
        let h = header.as_ref().expect("header parsed on line 1");
        let step: DemoStep = match serde_json::from_str(&line) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("line {lineno}: bad step: {e}"));
                continue;
            }
        };
        report.steps += 1;
        if step.obs.len() != h.obs_dim {
            problems.push(format!(
                "line {lineno}: obs length {} != obs_dim {}",
                step.obs.len(),
                h.obs_dim
            ));
        }
        if let Some((j, v)) = step
            .obs
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (-1.0..=1.0).contains(*v)))
        {
            problems.push(format!(
                "line {lineno}: obs[{j}] = {v} out of range [-1, 1]"
            ));
        }
        if !step.rew.is_finite() {
            problems.push(format!("line {lineno}: non-finite reward"));
        }
        let time = step.obs.get(TIME_INDEX).copied().unwrap_or(0.0);
        if let Some((pt, ptime, pdone)) = prev {
            if step.t <= pt {
                problems.push(format!(
                    "line {lineno}: t = {} not increasing (previous {pt})",
                    step.t
                ));
            }
            if !pdone && time < ptime {
                problems.push(format!(
                    "line {lineno}: round restarted without done on line {}",
                    lineno - 1
                ));
            }
        }
        if step.done {
            report.rounds += 1;
        }
        prev = Some((step.t, time, step.done));
    }
    if header.is_none() {
        problems.push("empty file".to_string());
    } else if report.steps == 0 {
        problems.push("no steps".to_string());
    }
    if let Some(h) = &header {
        report.duration_s = report.steps as f64 * h.tick_dt;
    }
    report.ok = report.problems.is_empty();
    report
}
