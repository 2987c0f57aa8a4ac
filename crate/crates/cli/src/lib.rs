//! Operational shell for the groupward reward engine: CLI commands, the
//! batch-scoring HTTP service, and the scripted mock judge server.

pub mod cli;
pub mod commands;
pub mod config;
pub mod mock_judge;
pub mod report;
pub mod service;
