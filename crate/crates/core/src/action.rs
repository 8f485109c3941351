//! Multi-discrete action space: `[move_x, move_y, act]` with cardinalities
//! `[3, 3, 2]`.

use serde::{Deserialize, Serialize};

use crate::error::ContractError;

/// Branch cardinalities.
pub const BRANCHES: [usize; 3] = [3, 3, 2];

/// Total number of logits across all branches.
pub const LOGITS: usize = 8;

/// Offsets of each branch inside a concatenated logit vector.
pub const BRANCH_OFFSETS: [usize; 3] = [0, 3, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u8; 3]", try_from = "[u8; 3]")]
pub struct Action {
    pub branches: [u8; 3],
}

impl Action {
    pub const NOOP: Action = Action {
        branches: [1, 1, 0],
    };

    pub fn new(branches: [u8; 3]) -> Result<Self, ContractError> {
        for (i, (&b, &n)) in branches.iter().zip(BRANCHES.iter()).enumerate() {
            if b as usize >= n {
                return Err(ContractError::new(format!(
                    "action branch {i} index {b} out of range 0..{n}"
                )));
            }
        }
        Ok(Self { branches })
    }

    /// Inverse of [`decode_action`].
    pub fn from_intent(intent: Intent) -> Self {
        Self {
            branches: [
                (intent.mv[0] + 1) as u8,
                (intent.mv[1] + 1) as u8,
                intent.throw as u8,
            ],
        }
    }

    /// Action with the x-movement reflected, for mapping between the team-local
    /// frame and world coordinates of the White team.
    pub fn mirror_x(self) -> Self {
        Self {
            branches: [2 - self.branches[0], self.branches[1], self.branches[2]],
        }
    }

    pub fn intent(self) -> Intent {
        Intent {
            mv: [self.branches[0] as i8 - 1, self.branches[1] as i8 - 1],
            throw: self.branches[2] == 1,
        }
    }

    /// Concatenated per-branch one-hot encoding (3 + 3 + 2 = 8 entries).
    pub fn one_hot(self) -> [f64; LOGITS] {
        let mut v = [0.0; LOGITS];
        for (b, &idx) in self.branches.iter().enumerate() {
            v[BRANCH_OFFSETS[b] + idx as usize] = 1.0;
        }
        v
    }
}

impl Default for Action {
    fn default() -> Self {
        Self::NOOP
    }
}

impl From<Action> for [u8; 3] {
    fn from(a: Action) -> Self {
        a.branches
    }
}

impl TryFrom<[u8; 3]> for Action {
    type Error = ContractError;
    fn try_from(b: [u8; 3]) -> Result<Self, Self::Error> {
        Action::new(b)
    }
}

/// Decoded movement intent. `mv` components are in {-1, 0, 1}; diagonal moves
/// are normalized by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Intent {
    pub mv: [i8; 2],
    pub throw: bool,
}

pub fn decode_action(a: &Action) -> Result<Intent, ContractError> {
    Action::new(a.branches).map(Action::intent)
}
