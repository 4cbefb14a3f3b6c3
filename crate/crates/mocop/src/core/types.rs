use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("prompt entropy {0} violates ceiling {1}")]
    EntropyTooHigh(f64, f64),
    #[error("prompt text empty")]
    EmptyPrompt,
    #[error("prompt text exceeds {0} characters")]
    PromptTooLong(usize),
    #[error("latency must be non-negative, got {0}")]
    NegativeLatency(f64),
    #[error("score component {0} = {1} outside [0, 1]")]
    ScoreOutOfRange(&'static str, f64),
    #[error("weight vector ({0}, {1}, {2}) violates simplex constraints")]
    InvalidWeights(f64, f64, f64),
}

/// The five moral domains a scenario can belong to.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum MoralDomain {
    Fairness,
    Privacy,
    Transparency,
    Coercion,
    Alignment,
}

impl MoralDomain {
    pub const ALL: [MoralDomain; 5] = [
        MoralDomain::Fairness,
        MoralDomain::Privacy,
        MoralDomain::Transparency,
        MoralDomain::Coercion,
        MoralDomain::Alignment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MoralDomain::Fairness => "fairness",
            MoralDomain::Privacy => "privacy",
            MoralDomain::Transparency => "transparency",
            MoralDomain::Coercion => "coercion",
            MoralDomain::Alignment => "alignment",
        }
    }
}

impl std::fmt::Display for MoralDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MAX_PROMPT_CHARS: usize = 2048;

/// One generated moral scenario, carrying its entropy certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPrompt {
    pub prompt_id: String,
    pub domain: MoralDomain,
    pub text: String,
    pub entropy: f64,
    pub cycle: u32,
    pub seed: u64,
}

impl ScenarioPrompt {
    /// Builds a prompt, enforcing the entropy ceiling and text bounds.
    pub fn new(
        prompt_id: String,
        domain: MoralDomain,
        text: String,
        entropy: f64,
        entropy_ceiling: f64,
        cycle: u32,
        seed: u64,
    ) -> Result<Self, CoreError> {
        if text.is_empty() {
            return Err(CoreError::EmptyPrompt);
        }
        if text.chars().count() > MAX_PROMPT_CHARS {
            return Err(CoreError::PromptTooLong(MAX_PROMPT_CHARS));
        }
        if !(entropy < entropy_ceiling) {
            return Err(CoreError::EntropyTooHigh(entropy, entropy_ceiling));
        }
        Ok(Self { prompt_id, domain, text, entropy, cycle, seed })
    }
}

/// A model's reply to one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub prompt_id: String,
    pub model_id: String,
    pub text: String,
    pub latency: f64,
    pub timestamp: DateTime<Utc>,
}

impl ModelResponse {
    pub fn new(
        prompt_id: String,
        model_id: String,
        text: String,
        latency: f64,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, CoreError> {
        if latency < 0.0 {
            return Err(CoreError::NegativeLatency(latency));
        }
        Ok(Self { prompt_id, model_id, text, latency, timestamp })
    }
}

/// The three layer scores plus the raw toxicity estimate, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTuple {
    pub s_lex: f64,
    pub s_sem: f64,
    pub s_rea: f64,
    pub tox: f64,
}

impl ScoreTuple {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (name, v) in [
            ("s_lex", self.s_lex),
            ("s_sem", self.s_sem),
            ("s_rea", self.s_rea),
            ("tox", self.tox),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(CoreError::ScoreOutOfRange(name, v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SafetyCategory {
    Safe,
    Borderline,
    Unsafe,
}

impl std::fmt::Display for SafetyCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SafetyCategory::Safe => "Safe",
            SafetyCategory::Borderline => "Borderline",
            SafetyCategory::Unsafe => "Unsafe",
        };
        f.write_str(s)
    }
}

/// One scored (model, prompt, response) event; the unit of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub run_id: String,
    pub cycle: u32,
    pub prompt_id: String,
    pub domain: MoralDomain,
    pub model_id: String,
    pub prompt_text: String,
    pub response_text: String,
    pub latency: f64,
    pub scores: ScoreTuple,
    pub composite: f64,
    pub category: SafetyCategory,
    pub degenerate: bool,
    pub timestamp: DateTime<Utc>,
}

/// Adaptive utility weights θ = (α, β, λ) on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EthicalWeightVector {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

/// Minimum value any θ component may take after projection.
pub const THETA_FLOOR: f64 = 0.05;

impl EthicalWeightVector {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self, CoreError> {
        let v = Self { alpha, beta, lambda };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let sum = self.alpha + self.beta + self.lambda;
        let on_simplex = (sum - 1.0).abs() <= 1e-9;
        let floored = [self.alpha, self.beta, self.lambda]
            .iter()
            .all(|&x| x >= THETA_FLOOR - 1e-12);
        if on_simplex && floored {
            Ok(())
        } else {
            Err(CoreError::InvalidWeights(self.alpha, self.beta, self.lambda))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.lambda]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_rejects_entropy_at_ceiling() {
        let r = ScenarioPrompt::new(
            "p1".into(),
            MoralDomain::Fairness,
            "some text".into(),
            0.7,
            0.7,
            0,
            1,
        );
        assert!(matches!(r, Err(CoreError::EntropyTooHigh(_, _))));
    }

    #[test]
    fn prompt_rejects_empty_text() {
        let r = ScenarioPrompt::new("p1".into(), MoralDomain::Privacy, String::new(), 0.1, 0.7, 0, 1);
        assert!(matches!(r, Err(CoreError::EmptyPrompt)));
    }

    #[test]
    fn weight_vector_enforces_simplex_and_floor() {
        assert!(EthicalWeightVector::new(0.3, 0.35, 0.35).is_ok());
        assert!(EthicalWeightVector::new(0.5, 0.5, 0.5).is_err());
        assert!(EthicalWeightVector::new(0.94, 0.05, 0.01).is_err());
    }

    #[test]
    fn score_tuple_range_check() {
        let t = ScoreTuple { s_lex: 0.5, s_sem: 0.4, s_rea: 1.1, tox: 0.0 };
        assert!(t.validate().is_err());
    }

    #[test]
    fn negative_latency_rejected() {
        let r = ModelResponse::new("p".into(), "m".into(), "ok".into(), -0.1, Utc::now());
        assert!(r.is_err());
    }
}
