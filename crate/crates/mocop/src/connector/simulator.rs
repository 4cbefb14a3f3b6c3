//! Calibrated offline simulator: a Gaussian-copula generative law over
//! (ethics score, toxicity, latency) plus a text synthesizer that steers
//! the guard's scores toward those targets.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};

use crate::core::{ScenarioPrompt, SimulatorProfile};
use crate::guard::{tokenize, Guard};

/// Fixed token budget for every synthesized response.
pub const RESPONSE_TOKENS: usize = 200;
/// Degradation ladder depth (bias blend steps + polarity-variance steps).
const DEGRADE_MAX: usize = 48;
/// Number of bias-marker sentences in the skeleton.
const BIAS_UNITS: usize = 16;
/// Content tokens per sentence before a period is inserted.
const SENTENCE_LEN: usize = 18;
/// Composite-score band the bridge clamps to; outside it the ladder and
/// echo budget cannot track the target faithfully.
const COMP_MIN: f64 = 0.34;
const COMP_MAX: f64 = 0.795;

/// Neutral vocabulary for padding; disjoint from every scoring lexicon.
const FILLER: [&str; 24] = [
    "however", "consider", "balance", "context", "moreover", "perspective", "framework",
    "granted", "precept", "deliberate", "weigh", "outcome", "process", "reflect", "judgment",
    "measured", "nuance", "tradeoff", "reasoned", "careful", "viewpoint", "premise",
    "discussion", "arguably",
];

/// Per-domain injection keyword: a severity-1.0 harm token that also
/// dominates the matching centroid passage.
fn harm_keyword(domain: crate::core::MoralDomain) -> &'static str {
    use crate::core::MoralDomain::*;
    match domain {
        Fairness => "subjugate",
        Privacy => "surveil",
        Transparency => "obfuscate",
        Coercion => "intimidate",
        Alignment => "subvert",
    }
}

/// One simulated outcome before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub text: String,
    pub target_e: f64,
    pub target_t: f64,
    pub latency: f64,
}

/// Draws (E, T, latency) from the profile's generative law. `shared_latent`
/// is the per-prompt standard-normal draw shared across models; each model
/// loads on it with sqrt(copula_rho) so equal-profile pairs correlate at
/// copula_rho.
pub fn draw_scores<R: Rng>(
    profile: &SimulatorProfile,
    shared_latent: f64,
    rng: &mut R,
) -> (f64, f64, f64) {
    let rho = profile.copula_rho.clamp(0.0, 1.0);
    let z_private: f64 = StandardNormal.sample(rng);
    let z = rho.sqrt() * shared_latent + (1.0 - rho).sqrt() * z_private;
    let e = (profile.mu_e + profile.sigma_e * z).clamp(0.0, 1.0);
    let eps = if profile.sigma_eps > 0.0 {
        Normal::new(0.0, profile.sigma_eps).expect("valid sigma").sample(rng)
    } else {
        0.0
    };
    let t = (profile.intercept_a - profile.slope_b * e + eps).clamp(0.0, 1.0);
    let beta = Beta::new(profile.latency_shape[0], profile.latency_shape[1])
        .expect("valid latency shape");
    let latency = 0.6 + 0.4 * beta.sample(rng);
    (e, t, latency)
}

/// Draws scores and synthesizes a response whose guard scores land near
/// the targets. The text is a pure function of (prompt, E, T, guard), so
/// two models given equal draws emit identical responses.
pub fn simulate_response<R: Rng>(
    profile: &SimulatorProfile,
    prompt: &ScenarioPrompt,
    shared_latent: f64,
    guard: &Guard,
    rng: &mut R,
) -> SimOutcome {
    let (e, t, latency) = draw_scores(profile, shared_latent, rng);
    let composite_target =
        (profile.comp_slope * e + profile.comp_intercept).clamp(COMP_MIN, COMP_MAX);
    let text = synthesize(guard, prompt, t, composite_target);
    SimOutcome { text, target_e: e, target_t: t, latency }
}

struct Layout<'a> {
    prompt_tokens: Vec<String>,
    keyword: &'a str,
}

impl Layout<'_> {
    /// Deterministically assembles the response text from the three control
    /// knobs: harm tokens `k`, echo tokens `echo`, degradation steps `d`.
    fn build(&self, k: usize, echo: usize, d: usize) -> String {
        let bias_hot = d.min(BIAS_UNITS);
        let extra = d.saturating_sub(BIAS_UNITS);
        // marker sentences: one token each, plus one polarity token when hot
        let degrade_tokens = BIAS_UNITS + bias_hot + extra;
        let content_len = RESPONSE_TOKENS.saturating_sub(degrade_tokens);
        let k = k.min(content_len);
        let echo = echo.min(content_len - k);
        let filler_len = content_len - k - echo;

        let mut content: Vec<&str> = Vec::with_capacity(content_len);
        for i in 0..echo {
            content.push(&self.prompt_tokens[i % self.prompt_tokens.len()]);
        }
        for _ in 0..k {
            content.push(self.keyword);
        }
        for i in 0..filler_len {
            content.push(FILLER[i % FILLER.len()]);
        }

        let mut out = String::with_capacity(RESPONSE_TOKENS * 8);
        for chunk in content.chunks(SENTENCE_LEN) {
            out.push_str(&chunk.join(" "));
            out.push_str(". ");
        }
        for i in 0..BIAS_UNITS {
            if i < bias_hot {
                out.push_str("stereotypical wicked. ");
            } else {
                out.push_str("stereotypical. ");
            }
        }
        for i in 0..extra {
            out.push_str(if i % 2 == 0 { "virtuous. " } else { "wicked. " });
        }
        out.trim_end().to_string()
    }
}

/// Binary-searches an integer knob so `measure(build(knob))` lands nearest
/// `target`; `measure` must be (approximately) monotone in the knob.
fn search<F: Fn(usize) -> f64>(lo: usize, hi: usize, target: f64, measure: F) -> usize {
    let (mut lo, mut hi) = (lo, hi);
    let increasing = measure(hi) >= measure(lo);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let v = measure(mid);
        if (v < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (measure(lo) - target).abs() <= (measure(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

/// Steers the guard's scores toward (tox_target, composite_target) with
/// three nested searches: harm density for toxicity, the degradation
/// ladder for lexical integrity, and the echo budget for coherence.
fn synthesize(
    guard: &Guard,
    prompt: &ScenarioPrompt,
    tox_target: f64,
    composite_target: f64,
) -> String {
    let mut prompt_tokens = tokenize(&prompt.text);
    if prompt_tokens.is_empty() {
        prompt_tokens.push("scenario".to_string());
    }
    let layout = Layout { prompt_tokens, keyword: harm_keyword(prompt.domain) };

    // Each pass fixes one knob with the other two held at their latest
    // values; a second sweep absorbs the coupling through the shared token
    // budget and the embedding norm.
    let (mut echo, mut d) = (RESPONSE_TOKENS / 3, 0);
    let mut k = 0;
    for _ in 0..2 {
        // pass 1: harm density for toxicity
        let k_max = RESPONSE_TOKENS.saturating_sub(echo + BIAS_UNITS + d);
        k = search(0, k_max, tox_target, |k| guard.toxicity(&layout.build(k, echo, d)));

        // the balanced target for the lexical and coherence layers follows
        // from the achieved toxicity through the composite weights
        let tox = guard.toxicity(&layout.build(k, echo, d));
        let s_sem = guard.semantic_safety(tox);
        let w = guard.config().composite_weights;
        let split = ((composite_target - w[1] * s_sem) / (w[0] + w[2])).clamp(0.0, 1.0);

        // pass 2: degradation ladder for s_lex
        d = search(0, DEGRADE_MAX, split, |d| {
            guard.lexical_integrity(&layout.build(k, echo, d))
        });

        // pass 3: echo budget for s_rea, inside the room the other knobs
        // left (the degradation ladder always consumes BIAS_UNITS + d tokens)
        let echo_max = RESPONSE_TOKENS.saturating_sub(k + BIAS_UNITS + d);
        echo = search(0, echo_max, split, |e| {
            crate::guard::reasoning_coherence(&prompt.text, &layout.build(k, e, d))
        });
    }

    layout.build(k, echo, d)
}

#[cfg(test)]
pub(crate) fn bridge_band() -> (f64, f64) {
    (COMP_MIN, COMP_MAX)
}
