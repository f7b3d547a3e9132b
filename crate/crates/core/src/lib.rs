//! Collaborative parallel thinking: synchronized parallel branch search over a
//! chat-model backend, sharing extracted notes through a deduplicated pool.
//!
//! The crate is organised bottom-up:
//!
//! * [`config`], [`rng`], [`branch`], [`mode`]: run configuration and shared domain types.
//! * [`backend`]: chunked chat generation (HTTP client and scripted backend) and prompt assembly.
//! * [`embedding`]: embedding providers and the cosine kernel used for deduplication.
//! * [`pool`]: note extraction prompts, `[BB_WRITE]` parsing, admission and broadcast sampling.
//! * [`scheduler`]: the windowed Probe → Broadcast → FreeRun state machine.
//! * [`orchestrator`]: the per-query search loop and batch driver.
//! * [`cost`]: request ledger and the analytic FLOPs estimator.
//! * [`theory`]: numeric checks of the redundancy / total-correlation identities.
//! * [`harness`]: answer extraction, Pass@1 / MV@K, information statistics, offline injection.
//!
//! Data-parallel sections go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to sequential loops otherwise.

pub mod backend;
pub mod branch;
pub mod config;
pub mod cost;
pub mod embedding;
pub mod harness;
mod http;
pub mod mode;
pub mod orchestrator;
pub mod par;
pub mod pool;
pub mod rng;
pub mod scheduler;
pub mod templates;
pub mod theory;

pub use branch::{BranchState, FinishReason, Segment};
pub use config::{ConfigError, RunConfig, SamplingParams, TopK};
pub use mode::Mode;
pub use par::Execution;
