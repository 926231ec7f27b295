pub mod applier;
pub mod cli;
pub mod config;
pub mod feedback;
pub mod gateway;
pub mod kb;
pub mod plan;
pub mod profiler;
pub mod report;
pub mod retriever;
pub mod session;
pub mod source;
