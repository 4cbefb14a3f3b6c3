//! Autonomous scenario generation: a slot-grammar over the five moral
//! domains, the categorical domain sampler, and the divergence-driven
//! feedback regulator over domain weights.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::core::{CoreError, MoralDomain, ScenarioPrompt};
use crate::guard::lexical_entropy;

/// Exploration band for per-domain weights.
pub const WEIGHT_MIN: f64 = 0.10;
pub const WEIGHT_MAX: f64 = 0.40;
/// Minimum cartesian slot space required per domain.
pub const MIN_DOMAIN_SPACE: u64 = 200;
/// Slot-sampling retry budget per generated prompt.
pub const MAX_ATTEMPTS: u32 = 32;

const EMBEDDED_TEMPLATES: &str = include_str!("../../assets/templates.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read template file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse template JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid template set: {0}")]
    InvalidTemplates(String),
    #[error("no templates for domain {0}")]
    UnknownDomain(MoralDomain),
    #[error("all {MAX_ATTEMPTS} candidates for {0} violated the entropy bound")]
    EntropyExhausted(MoralDomain),
    #[error("slot space for {0} is depleted after {MAX_ATTEMPTS} attempts")]
    UniquenessExhausted(MoralDomain),
    #[error("domain weights invalid: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Per-domain sampling weights on the probability simplex, each inside
/// the exploration band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainWeights(BTreeMap<MoralDomain, f64>);

impl DomainWeights {
    pub fn uniform() -> Self {
        Self(MoralDomain::ALL.iter().map(|&d| (d, 0.2)).collect())
    }

    pub fn new(map: BTreeMap<MoralDomain, f64>) -> Result<Self, ScenarioError> {
        let w = Self(map);
        w.validate()?;
        Ok(w)
    }

    /// Skips validation; for tests exercising degenerate distributions.
    pub fn unchecked(map: BTreeMap<MoralDomain, f64>) -> Self {
        Self(map)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.0.len() != MoralDomain::ALL.len() {
            return Err(ScenarioError::InvalidWeights(format!(
                "expected {} domains, got {}",
                MoralDomain::ALL.len(),
                self.0.len()
            )));
        }
        let sum: f64 = self.0.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ScenarioError::InvalidWeights(format!("sum = {sum}, expected 1")));
        }
        for (d, &w) in &self.0 {
            if !(WEIGHT_MIN - 1e-12..=WEIGHT_MAX + 1e-12).contains(&w) {
                return Err(ScenarioError::InvalidWeights(format!(
                    "{d} = {w} outside [{WEIGHT_MIN}, {WEIGHT_MAX}]"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, domain: MoralDomain) -> f64 {
        self.0.get(&domain).copied().unwrap_or(0.0)
    }

    pub fn as_map(&self) -> &BTreeMap<MoralDomain, f64> {
        &self.0
    }
}

/// One slot-grammar pattern: `{slot}` placeholders filled from candidate
/// phrase lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub domain: MoralDomain,
    pub pattern: String,
    pub slots: BTreeMap<String, Vec<String>>,
}

impl ScenarioTemplate {
    /// Slot names referenced by the pattern, in order of appearance.
    pub fn pattern_slots(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut rest = self.pattern.as_str();
        while let Some(open) = rest.find('{') {
            let Some(close) = rest[open..].find('}') else { break };
            names.push(rest[open + 1..open + close].to_string());
            rest = &rest[open + close + 1..];
        }
        names
    }

    /// Number of distinct texts this template can produce.
    pub fn slot_space(&self) -> u64 {
        self.pattern_slots()
            .iter()
            .collect::<BTreeSet<_>>()
            .iter()
            .map(|name| self.slots.get(*name).map_or(0, |v| v.len() as u64))
            .product()
    }

    /// Fills each distinct slot with one uniformly drawn candidate.
    pub fn fill<R: Rng>(&self, rng: &mut R) -> String {
        let names: BTreeSet<String> = self.pattern_slots().into_iter().collect();
        let mut text = self.pattern.clone();
        for name in names {
            let options = &self.slots[&name];
            let choice = &options[rng.gen_range(0..options.len())];
            text = text.replace(&format!("{{{name}}}"), choice);
        }
        text
    }
}

/// The validated template grammar, indexed by domain.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    by_domain: BTreeMap<MoralDomain, Vec<ScenarioTemplate>>,
    content_hash: String,
}

#[derive(Debug, Deserialize)]
struct RawTemplates {
    templates: Vec<ScenarioTemplate>,
}

impl TemplateStore {
    pub fn embedded() -> Result<Self, ScenarioError> {
        Self::from_json_str(EMBEDDED_TEMPLATES)
    }

    pub fn from_file(path: &str) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawTemplates = serde_json::from_str(text)?;
        Self::new(raw.templates)
    }

    pub fn new(templates: Vec<ScenarioTemplate>) -> Result<Self, ScenarioError> {
        let store = Self::unchecked(templates);
        for &domain in &MoralDomain::ALL {
            let Some(ts) = store.by_domain.get(&domain) else {
                return Err(ScenarioError::InvalidTemplates(format!(
                    "domain {domain} has no templates"
                )));
            };
            let mut space = 0u64;
            for t in ts {
                for name in t.pattern_slots() {
                    match t.slots.get(&name) {
                        Some(options) if !options.is_empty() => {}
                        _ => {
                            return Err(ScenarioError::InvalidTemplates(format!(
                                "slot {name:?} in a {domain} pattern has no candidates"
                            )))
                        }
                    }
                }
                space += t.slot_space();
            }
            if space < MIN_DOMAIN_SPACE {
                return Err(ScenarioError::InvalidTemplates(format!(
                    "domain {domain} slot space {space} < {MIN_DOMAIN_SPACE}"
                )));
            }
        }
        Ok(store)
    }

    /// Skips validation; for tests exercising tiny slot spaces.
    pub fn unchecked(templates: Vec<ScenarioTemplate>) -> Self {
        let canonical =
            serde_json::to_string(&templates).expect("templates serialize infallibly");
        let content_hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
        let mut by_domain: BTreeMap<MoralDomain, Vec<ScenarioTemplate>> = BTreeMap::new();
        for t in templates {
            by_domain.entry(t.domain).or_default().push(t);
        }
        Self { by_domain, content_hash }
    }

    /// Hash of the canonical template serialization, recorded in run
    /// manifests for reproducibility.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn for_domain(&self, domain: MoralDomain) -> Option<&[ScenarioTemplate]> {
        self.by_domain.get(&domain).map(Vec::as_slice)
    }

    pub fn templates(&self) -> impl Iterator<Item = &ScenarioTemplate> {
        self.by_domain.values().flatten()
    }
}

/// Draws a domain categorically proportional to its weight.
pub fn sample_domain<R: Rng>(weights: &DomainWeights, rng: &mut R) -> MoralDomain {
    let total: f64 = weights.as_map().values().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = MoralDomain::Fairness;
    for (&d, &w) in weights.as_map() {
        last = d;
        if u < w {
            return d;
        }
        u -= w;
    }
    last
}

/// Stateful prompt generator holding the run-level uniqueness set.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    store: TemplateStore,
    entropy_ceiling: f64,
    seen: BTreeSet<String>,
}

impl ScenarioGenerator {
    pub fn new(store: TemplateStore, entropy_ceiling: f64) -> Self {
        Self { store, entropy_ceiling, seen: BTreeSet::new() }
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    /// Generates one unique prompt under the entropy bound, retrying slot
    /// sampling up to [`MAX_ATTEMPTS`] times.
    pub fn generate<R: Rng>(
        &mut self,
        domain: MoralDomain,
        cycle: u32,
        rng: &mut R,
    ) -> Result<ScenarioPrompt, ScenarioError> {
        let templates = self
            .store
            .for_domain(domain)
            .filter(|ts| !ts.is_empty())
            .ok_or(ScenarioError::UnknownDomain(domain))?;
        let mut entropy_failures = 0;
        for _ in 0..MAX_ATTEMPTS {
            let template = &templates[rng.gen_range(0..templates.len())];
            let text = template.fill(rng);
            let entropy = lexical_entropy(&text);
            if entropy >= self.entropy_ceiling {
                entropy_failures += 1;
                continue;
            }
            if self.seen.contains(&text) {
                continue;
            }
            let digest = Sha256::digest(text.as_bytes());
            let prompt_id = format!("c{cycle:02}-{domain}-{:012x}", {
                let mut v = 0u64;
                for &b in &digest[..6] {
                    v = (v << 8) | b as u64;
                }
                v
            });
            let seed = rng.gen::<u64>();
            self.seen.insert(text.clone());
            return Ok(ScenarioPrompt::new(
                prompt_id,
                domain,
                text,
                entropy,
                self.entropy_ceiling,
                cycle,
                seed,
            )?);
        }
        if entropy_failures == MAX_ATTEMPTS {
            Err(ScenarioError::EntropyExhausted(domain))
        } else {
            Err(ScenarioError::UniquenessExhausted(domain))
        }
    }
}

/// Multiplicative divergence feedback: w' ∝ w·(1 + kappa·D), clamped to
/// the exploration band and renormalized.
pub fn update_domain_weights(
    weights: &DomainWeights,
    divergence: &BTreeMap<MoralDomain, f64>,
    kappa: f64,
) -> DomainWeights {
    if divergence.values().all(|&d| d == 0.0) {
        return weights.clone();
    }
    let mut w: Vec<(MoralDomain, f64)> = weights
        .as_map()
        .iter()
        .map(|(&d, &v)| {
            let div = divergence.get(&d).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            (d, v * (1.0 + kappa * div))
        })
        .collect();
    // clamp to the band, then rescale the interior coordinates until the
    // simplex constraint holds again
    for _ in 0..16 {
        for (_, v) in &mut w {
            *v = v.clamp(WEIGHT_MIN, WEIGHT_MAX);
        }
        let sum: f64 = w.iter().map(|(_, v)| v).sum();
        if (sum - 1.0).abs() <= 1e-12 {
            break;
        }
        let interior: Vec<usize> = (0..w.len())
            .filter(|&i| {
                let v = w[i].1;
                if sum > 1.0 {
                    v > WEIGHT_MIN + 1e-12
                } else {
                    v < WEIGHT_MAX - 1e-12
                }
            })
            .collect();
        if interior.is_empty() {
            break;
        }
        let fixed: f64 = (0..w.len())
            .filter(|i| !interior.contains(i))
            .map(|i| w[i].1)
            .sum();
        let free: f64 = interior.iter().map(|&i| w[i].1).sum();
        let scale = (1.0 - fixed) / free;
        for &i in &interior {
            w[i].1 *= scale;
        }
    }
    DomainWeights(w.into_iter().collect())
}
