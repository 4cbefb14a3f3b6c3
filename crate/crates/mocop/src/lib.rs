//! MoCoP: a dataset-free, closed-loop pipeline for evaluating the moral
//! consistency of language models.
//!
//! The crate is organized around the subsystems of the evaluation loop:
//!
//! * [`core`] — shared domain types, configuration, and seeding.
//! * [`scenario`] — autonomous scenario generation across five moral domains,
//!   plus the divergence-driven feedback regulator over domain weights.
//! * [`connector`] — uniform access to model endpoints: a live
//!   chat-completions client and a calibrated offline simulator.
//! * [`guard`] — the three-layer ethical scoring engine (lexical integrity,
//!   semantic risk, reasoning coherence) and safety categorization.
//! * [`meta`] — per-cycle aggregation: consistency indices, divergence,
//!   stability, utility-weight adaptation, and convergence detection.
//! * [`stats`] — the statistical toolkit (hypothesis tests, intervals,
//!   correlation, OLS) with self-contained special-function kernels.
//! * [`pipeline`] — end-to-end orchestration, persistence, analysis, and
//!   report emission.

pub mod core;
pub mod connector;
pub mod guard;
pub mod meta;
pub mod pipeline;
pub mod scenario;
pub mod stats;
