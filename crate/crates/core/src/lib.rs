//! Contextual code-review engine: diff-driven retrieval over AST chunks,
//! a multi-agent review with reflection, blending and PR analytics.

pub mod agents;
pub mod analytics;
pub mod blending;
pub mod chunker;
pub mod clock;
pub mod config;
pub mod context;
pub mod diff;
pub mod features;
pub mod git;
pub mod integrations;
pub mod llm;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod retry;
pub mod tokens;
