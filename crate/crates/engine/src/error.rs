use crate::agent::AgentError;
use crate::codec::CodecError;
use crate::report::Stage;

#[derive(Debug, thiserror::Error)]
pub enum StageFailure {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Core(#[from] anywhere_core::Error),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("writing artifact: {0}")]
    Io(#[from] std::io::Error),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A failure tagged with the pipeline step it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {failure}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub failure: StageFailure,
}

impl StageError {
    pub fn new(stage: Stage, failure: impl Into<StageFailure>) -> Self {
        Self {
            stage,
            failure: failure.into(),
        }
    }
}

/// Attaches a stage to any error convertible into [`StageFailure`].
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<StageFailure>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, e))
    }
}
