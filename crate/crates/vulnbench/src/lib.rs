//! vulnbench: a benchmark harness for vulnerability analyzers.
//!
//! Runs LLM-based project analysis, ingests externally produced SARIF,
//! normalizes everything into a SARIF 2.1.0 subset, scores findings against
//! ground-truth manifests, and renders precision/recall/F1/timing reports.

pub mod corpus;
pub mod llm;
pub mod matcher;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod sarif;
