//! Live OpenAI-compatible chat-completions client with per-endpoint pacing
//! and exponential-backoff retries.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::Deserialize;
use serde_json::json;

use super::ConnectorError;
use crate::core::{Clock, ModelResponse, ScenarioPrompt};

/// Base delay for exponential backoff between retries.
const BACKOFF_BASE_SECS: f64 = 0.5;

pub struct LiveEndpoint {
    model_id: String,
    base_url: String,
    credential_env: String,
    timeout_secs: f64,
    max_retries: u32,
    temperature: f64,
    max_tokens: u32,
    client: reqwest::blocking::Client,
    /// Start time of the previous request, for pacing enforcement.
    last_start: Mutex<Option<Instant>>,
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LiveEndpoint {
    pub fn new(
        model_id: String,
        base_url: String,
        credential_env: String,
        timeout_secs: f64,
        max_retries: u32,
        temperature: f64,
        max_tokens: u32,
    ) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(timeout_secs.max(0.001)))
            .build()
            .expect("client construction cannot fail with static options");
        Self {
            model_id,
            base_url,
            credential_env,
            timeout_secs,
            max_retries,
            temperature,
            max_tokens,
            client,
            last_start: Mutex::new(None),
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Sleeps until at least a uniformly drawn gap from `pacing` has passed
    /// since the previous request start, then records the new start.
    fn pace(&self, pacing: [f64; 2], rng: &mut ChaCha12Rng) -> Instant {
        let gap = rng.gen_range(pacing[0]..=pacing[1]);
        let mut last = self.last_start.lock().expect("pacing lock");
        if let Some(prev) = *last {
            let due = prev + Duration::from_secs_f64(gap);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let start = Instant::now();
        *last = Some(start);
        start
    }

    pub fn query(
        &self,
        prompt: &ScenarioPrompt,
        pacing: [f64; 2],
        clock: &dyn Clock,
        rng: &mut ChaCha12Rng,
    ) -> Result<ModelResponse, ConnectorError> {
        let key = std::env::var(&self.credential_env)
            .map_err(|_| ConnectorError::MissingCredential(self.credential_env.clone()))?;
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });

        let attempts = self.max_retries.max(1);
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = BACKOFF_BASE_SECS * 2f64.powi(attempt as i32 - 1);
                std::thread::sleep(Duration::from_secs_f64(backoff));
            }
            let start = self.pace(pacing, rng);
            let result = self
                .client
                .post(&url)
                .bearer_auth(&key)
                .json(&body)
                .send();
            match result {
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 401 || status.as_u16() == 403 {
                        return Err(ConnectorError::AuthError {
                            model_id: self.model_id.clone(),
                            detail: format!("HTTP {status}"),
                        });
                    }
                    if !status.is_success() {
                        last_error = format!("HTTP {status}");
                        continue;
                    }
                    let parsed: ChatCompletion = match resp.json() {
                        Ok(p) => p,
                        Err(err) => {
                            return Err(ConnectorError::ProtocolError {
                                model_id: self.model_id.clone(),
                                detail: err.to_string(),
                            })
                        }
                    };
                    let Some(choice) = parsed.choices.into_iter().next() else {
                        return Err(ConnectorError::ProtocolError {
                            model_id: self.model_id.clone(),
                            detail: "empty choices array".into(),
                        });
                    };
                    let latency = start.elapsed().as_secs_f64();
                    return Ok(ModelResponse {
                        prompt_id: prompt.prompt_id.clone(),
                        model_id: self.model_id.clone(),
                        text: choice.message.content,
                        latency,
                        timestamp: clock.now(),
                    });
                }
                Err(err) if err.is_timeout() => {
                    last_error = ConnectorError::Timeout {
                        model_id: self.model_id.clone(),
                        timeout_secs: self.timeout_secs,
                    }
                    .to_string();
                }
                Err(err) => {
                    last_error = err.to_string();
                }
            }
        }
        Err(ConnectorError::RetriesExhausted {
            model_id: self.model_id.clone(),
            attempts,
            last: last_error,
        })
    }
}
