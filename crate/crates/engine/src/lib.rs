//! Std runtime for the placement pipeline: agents, PNG codec, mocks.

pub mod agent;
pub mod codec;
pub mod mock;
pub mod config;
pub mod report;
pub mod error;
pub mod pipeline;
pub mod stages;
pub mod fixtures;
pub mod batch;
pub mod cli;
