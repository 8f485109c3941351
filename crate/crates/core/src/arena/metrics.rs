use serde::{Deserialize, Serialize};

use crate::engine::{Outcome, Team};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeResult {
    Blue,
    White,
    Draw,
}

impl EpisodeResult {
    pub fn from_outcome(o: Outcome) -> Option<Self> {
        match o {
            Outcome::Won {
                team: Team::Blue, ..
            } => Some(Self::Blue),
            Outcome::Won {
                team: Team::White, ..
            } => Some(Self::White),
            Outcome::Draw => Some(Self::Draw),
            Outcome::Ongoing => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Blue => "blue",
            Self::White => "white",
            Self::Draw => "draw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub outcome: EpisodeResult,
    pub duration_s: f64,
}

impl EpisodeRecord {
    /// Draws are logged at exactly `draw_time`.
    pub fn new(episode: usize, outcome: Outcome, draw_time: f64) -> Self {
        let (result, duration_s) = match outcome {
            Outcome::Won { team, time_s } => (
                if team == Team::Blue {
                    EpisodeResult::Blue
                } else {
                    EpisodeResult::White
                },
                time_s,
            ),
            Outcome::Draw | Outcome::Ongoing => (EpisodeResult::Draw, draw_time),
        };
        Self {
            episode,
            outcome: result,
            duration_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub mean_round_time_s: f64,
    pub draw_rate: f64,
    pub win_rate_blue: f64,
    pub win_rate_white: f64,
    /// `None` when the team never won.
    pub mean_win_time_blue_s: Option<f64>,
    pub mean_win_time_white_s: Option<f64>,
    pub log: Vec<EpisodeRecord>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl Metrics {
    pub fn from_log(log: Vec<EpisodeRecord>) -> Self {
        let n = log.len();
        let count = |r: EpisodeResult| log.iter().filter(|e| e.outcome == r).count();
        let (blue, white, draws) = (
            count(EpisodeResult::Blue),
            count(EpisodeResult::White),
            count(EpisodeResult::Draw),
        );
        let nf = n.max(1) as f64;
        let win_rate_blue = blue as f64 / nf;
        let win_rate_white = white as f64 / nf;
        let win_time =
            |r: EpisodeResult| mean(log.iter().filter(|e| e.outcome == r).map(|e| e.duration_s));
        Self {
            episodes: n,
            mean_round_time_s: mean(log.iter().map(|e| e.duration_s)).unwrap_or(0.0),
            draw_rate: draws as f64 / nf,
            win_rate_blue,
            win_rate_white,
            mean_win_time_blue_s: win_time(EpisodeResult::Blue),
            mean_win_time_white_s: win_time(EpisodeResult::White),
            log,
        }
    }

    /// Aligned two-column summary.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let rows = [
            ("episodes", self.episodes.to_string()),
            (
                "mean_round_time_s",
                format!("{:.2}", self.mean_round_time_s),
            ),
            ("draw_rate", format!("{:.4}", self.draw_rate)),
            ("win_rate_blue", format!("{:.4}", self.win_rate_blue)),
            ("win_rate_white", format!("{:.4}", self.win_rate_white)),
            ("mean_win_time_blue_s", opt(self.mean_win_time_blue_s)),
            ("mean_win_time_white_s", opt(self.mean_win_time_white_s)),
        ];
        rows.iter()
            .map(|(k, v)| format!("{k:<22}{v:>12}\n"))
            .collect()
    }

    /// `episode,outcome,duration_s` CSV with a header row.
    pub fn csv(&self) -> String {
        let mut s = String::from("episode,outcome,duration_s\n");
        for e in &self.log {
            s.push_str(&format!(
                "{},{},{}\n",
                e.episode,
                e.outcome.as_str(),
                e.duration_s
            ));
        }
        s
    }
}
