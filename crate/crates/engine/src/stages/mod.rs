//! One function per pipeline step that talks to an agent. Each returns its
//! result together with the [`StageRecord`](crate::report::StageRecord) for
//! the call log.

pub mod analyzer;
pub mod imaging;
pub mod prompting;

use crate::agent::AgentSet;
use crate::config::PipelineConfig;

/// What every stage needs: the role bindings and the run configuration.
#[derive(Debug, Clone, Copy)]
pub struct StageContext<'a> {
    pub agents: &'a AgentSet,
    pub config: &'a PipelineConfig,
}
