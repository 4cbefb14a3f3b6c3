//! Shared domain types, configuration, clocks, and deterministic seeding.

mod clock;
mod config;
mod rng;
mod types;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use config::{
    CategoryThresholds, ConfigError, EndpointConfig, FeedbackConfig, RunConfig, ScenarioConfig,
    ScoringConfig, SimulatorProfile, validate_config,
};
pub use rng::{derive_seed, stream_rng};
pub use types::{
    MAX_PROMPT_CHARS, THETA_FLOOR,
    CoreError, EthicalWeightVector, EvaluationRecord, ModelResponse, MoralDomain, SafetyCategory,
    ScenarioPrompt, ScoreTuple,
};
