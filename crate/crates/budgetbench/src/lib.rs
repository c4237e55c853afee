//! budgetbench: evaluating reasoning-model endpoints under compute
//! constraints.
//!
//! Two knobs trade quality against inference seconds: the requested
//! reasoning length (a "Think for n tokens." instruction appended to the
//! prompt) and the serving precision (weight-only INT8/INT4 quantization).
//! This crate measures both sides of the trade (skill as pass@1, safety
//! as safe@1), converts token budgets into reasoning time through measured
//! throughput, and extracts Pareto frontiers over (time, score) points.
//!
//! Module map:
//! - [`corpus`]: line-delimited JSON benchmark loading and validation
//! - [`lengthctl`]: prompt augmentation, target sampling, combined reward
//! - [`quant`]: round-to-nearest and second-order one-shot quantization
//! - [`metrics`]: answer matching, refusal matching, pass@1 / safe@1
//! - [`modelio`]: OpenAI-compatible completion and judge clients
//! - [`budget`]: throughput, reasoning time, Pareto analysis
//! - [`cli`]: the `budgetbench` subcommands and run persistence glue
//! - [`mock`]: a deterministic in-process endpoint for tests and demos

pub mod budget;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod lengthctl;
pub mod metrics;
pub mod mock;
pub mod modelio;
pub mod quant;
pub mod quantfile;
pub mod runfile;
pub mod tensorio;

pub use error::{Error, Result};
