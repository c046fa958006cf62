use std::io;

use thiserror::Error;

use crate::amp::AmpTrace;
use crate::l1::L1Trace;

pub type Result<T> = std::result::Result<T, CassiError>;

#[derive(Debug, Error)]
pub enum CassiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dense materialization refused: {entries} entries exceeds cap of {cap}")]
    SizeCap { entries: usize, cap: usize },

    #[error("AMP diverged at iteration {iteration}")]
    AmpDiverged {
        iteration: usize,
        trace: Box<AmpTrace>,
    },

    #[error("proximal-gradient solver diverged at iteration {iteration}")]
    L1Diverged {
        iteration: usize,
        trace: Box<L1Trace>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CassiError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        CassiError::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CassiError::InvalidConfig(msg.into())
    }

    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            CassiError::AmpDiverged { .. } | CassiError::L1Diverged { .. }
        )
    }
}

pub(crate) fn ensure_len(what: &str, actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(CassiError::dim(format!(
            "{what} has length {actual}, expected {expected}"
        )));
    }
    Ok(())
}
