//! The interaction layer: uniform, paced, reproducible access to model
//! endpoints — a live chat-completions client and the calibrated offline
//! simulator.

mod live;
mod simulator;

pub use live::LiveEndpoint;
pub use simulator::{draw_scores, simulate_response, SimOutcome, RESPONSE_TOKENS};

use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::core::{Clock, EndpointConfig, ModelResponse, ScenarioPrompt, SimulatorProfile};
use crate::guard::Guard;

#[derive(Debug, Error)]
pub enum ConnectorError {
    #[error("request to {model_id} timed out after {timeout_secs} s")]
    Timeout { model_id: String, timeout_secs: f64 },
    #[error("malformed payload from {model_id}: {detail}")]
    ProtocolError { model_id: String, detail: String },
    #[error("authentication failed for {model_id}: {detail}")]
    AuthError { model_id: String, detail: String },
    #[error("{model_id}: all {attempts} attempts failed; last: {last}")]
    RetriesExhausted { model_id: String, attempts: u32, last: String },
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
}

/// One queryable endpoint. The simulator consumes the shared latent and the
/// per-query rng; the live client uses the rng only for pacing jitter.
pub enum Endpoint {
    Live(LiveEndpoint),
    Simulated(SimulatedEndpoint),
}

impl Endpoint {
    /// Builds from config; `offline` forces simulated mode, preserving the
    /// model id so run logs stay comparable.
    pub fn from_config(cfg: &EndpointConfig, offline: bool) -> Self {
        match cfg {
            EndpointConfig::Simulated { model_id, profile } => {
                Endpoint::Simulated(SimulatedEndpoint {
                    model_id: model_id.clone(),
                    profile: profile.clone(),
                })
            }
            EndpointConfig::Live { model_id, .. } if offline => {
                Endpoint::Simulated(SimulatedEndpoint {
                    model_id: model_id.clone(),
                    profile: SimulatorProfile::default(),
                })
            }
            EndpointConfig::Live {
                model_id,
                base_url,
                credential_env,
                timeout_secs,
                max_retries,
                temperature,
                max_tokens,
            } => Endpoint::Live(LiveEndpoint::new(
                model_id.clone(),
                base_url.clone(),
                credential_env.clone(),
                *timeout_secs,
                *max_retries,
                *temperature,
                *max_tokens,
            )),
        }
    }

    pub fn model_id(&self) -> &str {
        match self {
            Endpoint::Live(l) => l.model_id(),
            Endpoint::Simulated(s) => &s.model_id,
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self, Endpoint::Live(_))
    }

    /// Queries the endpoint for one prompt. `shared_latent` couples the
    /// simulated models' ethics draws; `pacing` is the live inter-request
    /// window in seconds.
    pub fn query(
        &self,
        prompt: &ScenarioPrompt,
        shared_latent: f64,
        guard: &Guard,
        pacing: [f64; 2],
        clock: &dyn Clock,
        rng: &mut ChaCha12Rng,
    ) -> Result<ModelResponse, ConnectorError> {
        match self {
            Endpoint::Simulated(s) => Ok(s.query(prompt, shared_latent, guard, clock, rng)),
            Endpoint::Live(l) => l.query(prompt, pacing, clock, rng),
        }
    }
}

/// Offline endpoint wrapping a calibrated simulator profile.
pub struct SimulatedEndpoint {
    pub model_id: String,
    pub profile: SimulatorProfile,
}

impl SimulatedEndpoint {
    pub fn query(
        &self,
        prompt: &ScenarioPrompt,
        shared_latent: f64,
        guard: &Guard,
        clock: &dyn Clock,
        rng: &mut ChaCha12Rng,
    ) -> ModelResponse {
        let outcome = simulate_response(&self.profile, prompt, shared_latent, guard, rng);
        clock.advance(outcome.latency);
        ModelResponse {
            prompt_id: prompt.prompt_id.clone(),
            model_id: self.model_id.clone(),
            text: outcome.text,
            latency: outcome.latency,
            timestamp: clock.now(),
        }
    }
}

#[cfg(test)]
mod tests;
