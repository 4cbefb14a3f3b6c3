//! End-to-end orchestration of the evaluation cycle: generate prompts, query
//! every endpoint, score, aggregate, adapt, and persist incrementally; plus
//! log analysis and report emission.

mod analyze;
mod report;

pub use analyze::{
    analyze_log, analyze_records, published_consistency, CategoryRow, CategorySection,
    ComparisonSection, CorrelationSection, DivergenceSection, ModelDescriptives, PublishedCheck,
    PlotData, RegressionSection, StatReport,
};
pub use report::emit;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::connector::{ConnectorError, Endpoint};
use crate::core::{
    stream_rng, validate_config, Clock, ConfigError, EvaluationRecord, MoralDomain, RunConfig,
    ScenarioPrompt, SystemClock, VirtualClock,
};
use crate::guard::{Guard, GuardError, Lexicons};
use crate::meta::{
    check_convergence, eci, moral_divergence, update_theta, utility, ConvergenceStatus,
    CycleSummary, MeanFeatures, MetaError,
};
use crate::scenario::{
    sample_domain, update_domain_weights, DomainWeights, ScenarioError, ScenarioGenerator,
    TemplateStore,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("storage error at {path}: {source}")]
    Storage { path: String, source: std::io::Error },
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("run requires at least two endpoints, got {0}")]
    TooFewEndpoints(usize),
}

fn storage(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Storage { path: path.display().to_string(), source }
}

/// Per-model connector accounting for the manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub attempts: u64,
    pub successes: u64,
    pub failures: u64,
}

/// The reproducibility envelope of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub artifact_version: String,
    pub config: RunConfig,
    pub lexicon_hash: String,
    pub template_hash: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub model_stats: BTreeMap<String, ModelStats>,
    pub convergence: ConvergenceStatus,
    pub converged_cycle: Option<u32>,
    pub cycles_completed: u32,
    pub records_written: u64,
}

/// Paths and manifest produced by [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    pub records_path: PathBuf,
    pub cycles_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Stable run identifier: a digest of the full configuration, so identical
/// configs name identical runs.
pub fn run_id_of(config: &RunConfig) -> Result<String, PipelineError> {
    let canonical = serde_json::to_string(config)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(format!("{:x}", digest)[..12].to_string())
}

/// Resolves the output directory: explicit config value, then the
/// `MOCOP_OUT_DIR` environment fallback, then `runs/<run_id>`.
pub fn resolve_out_dir(config: &RunConfig, run_id: &str) -> PathBuf {
    if let Some(dir) = &config.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("MOCOP_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir).join(run_id);
        }
    }
    PathBuf::from("runs").join(run_id)
}

struct CycleQueryOutcome {
    records: Vec<Option<EvaluationRecord>>,
    attempts: u64,
    failures: u64,
}

/// Executes the full closed loop and persists `records.jsonl`,
/// `cycles.jsonl`, and `manifest.json` under the output directory. Outputs
/// are flushed after every cycle so interrupted runs stay analyzable.
pub fn run(config: RunConfig) -> Result<RunOutput, PipelineError> {
    let config = validate_config(config)?;
    if config.endpoints.len() < 2 {
        return Err(PipelineError::TooFewEndpoints(config.endpoints.len()));
    }
    let run_id = run_id_of(&config)?;
    let out_dir = resolve_out_dir(&config, &run_id);
    fs::create_dir_all(&out_dir).map_err(|e| storage(&out_dir, e))?;

    let lexicons = match &config.scoring.lexicon_file {
        Some(path) => Lexicons::from_file(path)?,
        None => Lexicons::embedded()?,
    };
    let lexicon_hash = lexicons.content_hash.clone();
    let guard = Guard::with_lexicons(lexicons, config.scoring.clone())?;

    let store = match &config.scenario.template_file {
        Some(path) => TemplateStore::from_file(path)?,
        None => TemplateStore::embedded()?,
    };
    let template_hash = store.content_hash().to_string();
    let mut generator = ScenarioGenerator::new(store, config.scenario.entropy_ceiling);

    let endpoints: Vec<Endpoint> = config
        .endpoints
        .iter()
        .map(|ep| Endpoint::from_config(ep, config.offline))
        .collect();
    let any_live = endpoints.iter().any(Endpoint::is_live);

    // One clock per endpoint keeps simulated time deterministic regardless
    // of thread scheduling; live endpoints use wall time.
    let clocks: Vec<Box<dyn Clock>> = endpoints
        .iter()
        .map(|ep| {
            if ep.is_live() {
                Box::new(SystemClock) as Box<dyn Clock>
            } else {
                Box::new(VirtualClock::new()) as Box<dyn Clock>
            }
        })
        .collect();
    let run_clock: Box<dyn Clock> = if any_live {
        Box::new(SystemClock)
    } else {
        Box::new(VirtualClock::new())
    };
    let started_at = run_clock.now();

    let records_path = out_dir.join("records.jsonl");
    let cycles_path = out_dir.join("cycles.jsonl");
    let manifest_path = out_dir.join("manifest.json");
    let mut records_file = BufWriter::new(
        File::create(&records_path).map_err(|e| storage(&records_path, e))?,
    );
    let mut cycles_file =
        BufWriter::new(File::create(&cycles_path).map_err(|e| storage(&cycles_path, e))?);

    // Common random numbers: the shared latent for slot i is fixed across
    // cycles so the utility series reflects adaptation, not resampling noise.
    let latents: Vec<f64> = {
        let mut rng = stream_rng(config.seed, &["latent"]);
        (0..config.n_prompts)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    };

    let mut weights = DomainWeights::uniform();
    let mut theta = config.initial_theta();
    theta.validate()?;
    let mut model_stats: BTreeMap<String, ModelStats> = endpoints
        .iter()
        .map(|ep| (ep.model_id().to_string(), ModelStats::default()))
        .collect();
    let mut j_series: Vec<f64> = Vec::new();
    let mut eci_series: Vec<f64> = Vec::new();
    let mut convergence = ConvergenceStatus::Running;
    let mut converged_cycle = None;
    let mut cycles_completed = 0u32;
    let mut records_written = 0u64;

    for cycle in 0..config.n_cycles {
        // generation is sequential: the uniqueness set is global to the run
        let mut prompts: Vec<ScenarioPrompt> = Vec::with_capacity(config.n_prompts);
        for slot in 0..config.n_prompts {
            let mut rng =
                stream_rng(config.seed, &["scenario", &cycle.to_string(), &slot.to_string()]);
            let domain = sample_domain(&weights, &mut rng);
            prompts.push(generator.generate(domain, cycle, &mut rng)?);
        }

        // per-endpoint workers; a scope join is the cycle barrier
        let outcomes: Vec<CycleQueryOutcome> = std::thread::scope(|scope| {
            let handles: Vec<_> = endpoints
                .iter()
                .zip(&clocks)
                .map(|(endpoint, clock)| {
                    let prompts = &prompts;
                    let latents = &latents;
                    let guard = &guard;
                    let config = &config;
                    let run_id = &run_id;
                    scope.spawn(move || {
                        query_cycle(endpoint, &**clock, prompts, latents, guard, config, run_id)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("endpoint worker must not panic"))
                .collect()
        });

        let mut cycle_records: Vec<EvaluationRecord> = Vec::new();
        for slot in 0..prompts.len() {
            for (endpoint, outcome) in endpoints.iter().zip(&outcomes) {
                let _ = endpoint;
                if let Some(rec) = &outcome.records[slot] {
                    cycle_records.push(rec.clone());
                }
            }
        }
        for (endpoint, outcome) in endpoints.iter().zip(&outcomes) {
            let stats = model_stats
                .get_mut(endpoint.model_id())
                .expect("stats preallocated per endpoint");
            stats.attempts += outcome.attempts;
            stats.failures += outcome.failures;
            stats.successes += outcome.attempts - outcome.failures;
        }

        for rec in &cycle_records {
            let line = serialize_record(rec, config.redact_responses)?;
            records_file
                .write_all(line.as_bytes())
                .and_then(|_| records_file.write_all(b"\n"))
                .map_err(|e| storage(&records_path, e))?;
            records_written += 1;
        }
        records_file.flush().map_err(|e| storage(&records_path, e))?;

        let summary = summarize_cycle(cycle, &cycle_records, &theta)?;
        j_series.push(summary.j);
        let pooled_eci =
            summary.eci.values().sum::<f64>() / summary.eci.len().max(1) as f64;
        eci_series.push(pooled_eci);

        theta = update_theta(
            &theta,
            pooled_features(&cycle_records),
            config.feedback.eta,
            config.feedback.gamma_max,
            config.feedback.literal_descent,
        );
        theta.validate()?;
        weights = update_domain_weights(
            &weights,
            &summary.per_domain_divergence,
            config.feedback.kappa,
        );
        weights.validate()?;

        let line = serde_json::to_string(&summary)?;
        cycles_file
            .write_all(line.as_bytes())
            .and_then(|_| cycles_file.write_all(b"\n"))
            .map_err(|e| storage(&cycles_path, e))?;
        cycles_file.flush().map_err(|e| storage(&cycles_path, e))?;
        cycles_completed = cycle + 1;

        if check_convergence(&j_series, &eci_series, config.feedback.epsilon)
            == ConvergenceStatus::Converged
        {
            convergence = ConvergenceStatus::Converged;
            converged_cycle = Some(cycle);
            break;
        }
    }

    let manifest = RunManifest {
        run_id,
        artifact_version: ARTIFACT_VERSION.to_string(),
        config,
        lexicon_hash,
        template_hash,
        started_at,
        finished_at: run_clock.now(),
        model_stats,
        convergence,
        converged_cycle,
        cycles_completed,
        records_written,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, manifest_json.as_bytes())
        .map_err(|e| storage(&manifest_path, e))?;

    Ok(RunOutput { manifest, out_dir, records_path, cycles_path, manifest_path })
}

/// Queries one endpoint for every prompt of a cycle. The per-slot rng stream
/// is keyed by (model, slot) only, so draws repeat across cycles (common
/// random numbers); failures leave a gap and are counted.
fn query_cycle(
    endpoint: &Endpoint,
    clock: &dyn Clock,
    prompts: &[ScenarioPrompt],
    latents: &[f64],
    guard: &Guard,
    config: &RunConfig,
    run_id: &str,
) -> CycleQueryOutcome {
    let mut records = Vec::with_capacity(prompts.len());
    let mut failures = 0u64;
    for (slot, prompt) in prompts.iter().enumerate() {
        let mut rng = stream_rng(
            config.seed,
            &["query", endpoint.model_id(), &slot.to_string()],
        );
        match endpoint.query(prompt, latents[slot], guard, config.pacing, clock, &mut rng) {
            Ok(response) => records.push(Some(guard.score(prompt, &response, run_id))),
            Err(err) => {
                log_failure(endpoint.model_id(), prompt, &err);
                failures += 1;
                records.push(None);
            }
        }
    }
    CycleQueryOutcome { records, attempts: prompts.len() as u64, failures }
}

fn log_failure(model_id: &str, prompt: &ScenarioPrompt, err: &ConnectorError) {
    eprintln!("[{model_id}] {} failed: {err}", prompt.prompt_id);
}

fn serialize_record(
    rec: &EvaluationRecord,
    redact: bool,
) -> Result<String, serde_json::Error> {
    if !redact {
        return serde_json::to_string(rec);
    }
    let mut clone = rec.clone();
    let digest = Sha256::digest(clone.response_text.as_bytes());
    clone.response_text = format!("sha256:{:x}", digest);
    serde_json::to_string(&clone)
}

/// Mean (L, R, tau) over all models' records of a cycle; drives the theta
/// update.
fn pooled_features(records: &[EvaluationRecord]) -> MeanFeatures {
    let n = records.len().max(1) as f64;
    MeanFeatures {
        l: records.iter().map(|r| r.scores.s_lex).sum::<f64>() / n,
        r: records.iter().map(|r| r.scores.s_rea).sum::<f64>() / n,
        tau: records.iter().map(|r| r.scores.tox).sum::<f64>() / n,
    }
}

/// Builds the cycle aggregate: per-model ECI and features, pooled utility,
/// cross-model divergence (mean over model pairs), and category counts.
pub fn summarize_cycle(
    cycle: u32,
    records: &[EvaluationRecord],
    theta: &crate::core::EthicalWeightVector,
) -> Result<CycleSummary, PipelineError> {
    let mut by_model: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
    for rec in records {
        by_model.entry(&rec.model_id).or_default().push(rec);
    }

    let mut eci_map = BTreeMap::new();
    let mut feature_map = BTreeMap::new();
    for (model, recs) in &by_model {
        let composites: Vec<f64> = recs.iter().map(|r| r.composite).collect();
        eci_map.insert(model.to_string(), eci(&composites)?);
        let n = recs.len() as f64;
        feature_map.insert(
            model.to_string(),
            MeanFeatures {
                l: recs.iter().map(|r| r.scores.s_lex).sum::<f64>() / n,
                r: recs.iter().map(|r| r.scores.s_rea).sum::<f64>() / n,
                tau: recs.iter().map(|r| r.scores.tox).sum::<f64>() / n,
            },
        );
    }

    let models: Vec<&str> = by_model.keys().copied().collect();
    let mut d_moral = 0.0;
    let mut per_domain: BTreeMap<MoralDomain, (f64, usize)> = BTreeMap::new();
    let mut pairs = 0usize;
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let a = scored_map(&by_model[models[i]]);
            let b = scored_map(&by_model[models[j]]);
            match moral_divergence(&a, &b) {
                Ok(div) => {
                    d_moral += div.d_moral;
                    pairs += 1;
                    for (domain, v) in div.per_domain {
                        let entry = per_domain.entry(domain).or_insert((0.0, 0));
                        entry.0 += v;
                        entry.1 += 1;
                    }
                }
                Err(MetaError::NoPairs) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    if pairs > 0 {
        d_moral /= pairs as f64;
    }
    let per_domain_divergence = per_domain
        .into_iter()
        .map(|(d, (sum, count))| (d, sum / count as f64))
        .collect();

    let mut category_counts = BTreeMap::new();
    for rec in records {
        *category_counts.entry(rec.category).or_insert(0u64) += 1;
    }

    Ok(CycleSummary {
        cycle,
        eci: eci_map,
        mean_features: feature_map,
        j: utility(pooled_features(records), theta),
        theta: theta.clone(),
        d_moral,
        per_domain_divergence,
        category_counts,
    })
}

fn scored_map(recs: &[&EvaluationRecord]) -> BTreeMap<String, (MoralDomain, f64)> {
    recs.iter()
        .map(|r| (r.prompt_id.clone(), (r.domain, r.composite)))
        .collect()
}
