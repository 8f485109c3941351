use thiserror::Error;

/// A caller violated an operation's preconditions (wrong lengths, indices out
/// of range, mismatched shapes).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("contract violation: {0}")]
pub struct ContractError(pub String);

impl ContractError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid arena configuration: {0}")]
    Config(String),
    #[error("invalid world state: {0}")]
    State(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
}
