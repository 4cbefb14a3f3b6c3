//! Log analysis: rebuilds the full statistical picture of a run from its
//! record log, with a published-statistics section checked against pinned
//! reference values.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::core::{EvaluationRecord, SafetyCategory};
use crate::meta::{coherence_ratio, moral_divergence, msi};
use crate::stats::{
    chi2_2x2, describe, f_ratio_from_summary, levene, ols2, pearson, pooled_from_summary,
    risk_ratio_arr, shapiro_wilk, spearman, t_test_pooled, t_test_welch, welch_from_summary,
    wilson_interval, Chi2Result, CorrResult, Descriptives, FTestResult, Ols2Result, RiskResult,
    Sample, TTestResult, Table2x2,
};

const EMBEDDED_EXPECTATIONS: &str = include_str!("../../assets/expectations.json");
const Z95: f64 = 1.959963984540054;
/// Cap on emitted scatter rows so plot data stays desk-sized.
const SCATTER_CAP: usize = 2000;

/// Per-model safety-category tallies with the Unsafe Wilson band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub n: u64,
    pub safe: u64,
    pub borderline: u64,
    pub unsafe_: u64,
    pub prop_safe: f64,
    pub prop_borderline: f64,
    pub prop_unsafe: f64,
    pub unsafe_wilson_low: Option<f64>,
    pub unsafe_wilson_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySection {
    pub per_model: BTreeMap<String, CategoryRow>,
    pub pooled: CategoryRow,
    /// Unsafe-rate chi-square over the first two models.
    pub chi2: Option<Chi2Result>,
    pub risk: Option<RiskResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptives {
    pub composite: Descriptives,
    pub msi: Option<f64>,
    pub coherence_ratio: Option<f64>,
    pub shapiro_w: Option<f64>,
    pub shapiro_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSection {
    pub models: [String; 2],
    pub pooled_t: Option<TTestResult>,
    pub welch_t: Option<TTestResult>,
    pub f_test: Option<FTestResult>,
    pub levene: Option<FTestResult>,
    pub cross_model_r: Option<CorrResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSection {
    pub ethics_toxicity: Option<CorrResult>,
    pub ethics_toxicity_spearman: Option<CorrResult>,
    pub ethics_latency: Option<CorrResult>,
    pub toxicity_latency: Option<CorrResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSection {
    /// Ethics (composite) on toxicity and latency.
    pub ols: Ols2Result,
    pub n: usize,
    /// Pooled 3x3 Pearson matrix over (ethics, toxicity, latency).
    pub matrix_labels: [String; 3],
    pub matrix: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSection {
    pub per_cycle: Vec<(u32, f64)>,
    pub mean_d_moral: f64,
    pub unpaired: usize,
}

/// One published-statistics check: the stated value, what recomputation from
/// the pinned reference inputs gives, and whether they agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedCheck {
    pub name: String,
    pub stated: f64,
    pub computed: Option<f64>,
    pub consistent: Option<bool>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub model: String,
    pub ethics: f64,
    pub toxicity: f64,
    pub latency: f64,
}

/// Underlying data for the figure analogues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub histograms: BTreeMap<String, Vec<HistBin>>,
    pub boxes: BTreeMap<String, BoxStats>,
    pub scatter: Vec<ScatterRow>,
}

/// The complete analysis of one record log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub run_id: Option<String>,
    pub models: Vec<String>,
    pub n_records: usize,
    pub cycles: Vec<u32>,
    pub dropped_incomplete_cycles: Vec<u32>,
    pub category: CategorySection,
    pub descriptives: BTreeMap<String, ModelDescriptives>,
    pub comparisons: Option<ComparisonSection>,
    pub correlations: BTreeMap<String, CorrelationSection>,
    pub regression: Option<RegressionSection>,
    pub divergence: Option<DivergenceSection>,
    pub published_consistency: Vec<PublishedCheck>,
    pub plots: PlotData,
}

/// Reads a record log, tolerating a truncated trailing line, and analyzes
/// the complete cycles it contains.
pub fn analyze_log(path: &Path) -> Result<StatReport, PipelineError> {
    let file = std::fs::File::open(path)
        .map_err(|e| super::storage(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| super::storage(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is data loss, not an
        // analysis error
        if let Ok(rec) = serde_json::from_str::<EvaluationRecord>(&line) {
            records.push(rec);
        }
    }
    Ok(analyze_records(&records))
}

/// Analyzes scored records directly. Cycles where the models' prompt sets
/// disagree (interrupted mid-cycle) are dropped and listed.
pub fn analyze_records(records: &[EvaluationRecord]) -> StatReport {
    let (records, dropped) = complete_cycles(records);
    let models: Vec<String> = records
        .iter()
        .map(|r| r.model_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cycles: Vec<u32> = records
        .iter()
        .map(|r| r.cycle)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let by_model: BTreeMap<&str, Vec<&EvaluationRecord>> = {
        let mut m: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
        for r in &records {
            m.entry(&r.model_id).or_default().push(r);
        }
        m
    };

    let category = category_section(&records, &by_model, &models);
    let mut descriptives = BTreeMap::new();
    let mut correlations = BTreeMap::new();
    for (model, recs) in &by_model {
        descriptives.insert(model.to_string(), model_descriptives(recs));
        correlations.insert(model.to_string(), correlation_section(recs));
    }
    let comparisons = if models.len() >= 2 {
        Some(comparison_section(
            &models[0],
            &models[1],
            &by_model[models[0].as_str()],
            &by_model[models[1].as_str()],
        ))
    } else {
        None
    };
    let regression = regression_section(&records);
    let divergence = if models.len() >= 2 {
        divergence_section(&records, &models[0], &models[1])
    } else {
        None
    };

    StatReport {
        run_id: records.first().map(|r| r.run_id.clone()),
        models,
        n_records: records.len(),
        cycles,
        dropped_incomplete_cycles: dropped,
        category,
        descriptives,
        comparisons,
        correlations,
        regression,
        divergence,
        published_consistency: published_consistency(),
        plots: plot_data(&records),
    }
}

/// Keeps only cycles where every model answered the same prompt set.
fn complete_cycles(records: &[EvaluationRecord]) -> (Vec<EvaluationRecord>, Vec<u32>) {
    let all_models: BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    let mut by_cycle: BTreeMap<u32, BTreeMap<&str, BTreeSet<&str>>> = BTreeMap::new();
    for r in records {
        by_cycle
            .entry(r.cycle)
            .or_default()
            .entry(&r.model_id)
            .or_default()
            .insert(&r.prompt_id);
    }
    let mut complete = BTreeSet::new();
    let mut dropped = Vec::new();
    for (cycle, per_model) in &by_cycle {
        let sets: Vec<&BTreeSet<&str>> = per_model.values().collect();
        let ok = per_model.len() == all_models.len()
            && sets.windows(2).all(|w| w[0] == w[1]);
        if ok {
            complete.insert(*cycle);
        } else {
            dropped.push(*cycle);
        }
    }
    let kept = records
        .iter()
        .filter(|r| complete.contains(&r.cycle))
        .cloned()
        .collect();
    (kept, dropped)
}

fn category_row(recs: &[&EvaluationRecord]) -> CategoryRow {
    let count = |c: SafetyCategory| recs.iter().filter(|r| r.category == c).count() as u64;
    let n = recs.len() as u64;
    let (safe, borderline, unsafe_) = (
        count(SafetyCategory::Safe),
        count(SafetyCategory::Borderline),
        count(SafetyCategory::Unsafe),
    );
    let wilson = wilson_interval(unsafe_, n, Z95).ok();
    CategoryRow {
        n,
        safe,
        borderline,
        unsafe_,
        prop_safe: safe as f64 / n.max(1) as f64,
        prop_borderline: borderline as f64 / n.max(1) as f64,
        prop_unsafe: unsafe_ as f64 / n.max(1) as f64,
        unsafe_wilson_low: wilson.map(|w| w.0),
        unsafe_wilson_high: wilson.map(|w| w.1),
    }
}

fn category_section(
    records: &[EvaluationRecord],
    by_model: &BTreeMap<&str, Vec<&EvaluationRecord>>,
    models: &[String],
) -> CategorySection {
    let per_model: BTreeMap<String, CategoryRow> = by_model
        .iter()
        .map(|(m, recs)| (m.to_string(), category_row(recs)))
        .collect();
    let all: Vec<&EvaluationRecord> = records.iter().collect();
    let pooled = category_row(&all);
    let (chi2, risk) = if models.len() >= 2 {
        let a = &per_model[&models[0]];
        let b = &per_model[&models[1]];
        let table = Table2x2 {
            a: a.unsafe_,
            b: a.n - a.unsafe_,
            c: b.unsafe_,
            d: b.n - b.unsafe_,
        };
        (chi2_2x2(&table, false).ok(), risk_ratio_arr(&table).ok())
    } else {
        (None, None)
    };
    CategorySection { per_model, pooled, chi2, risk }
}

fn model_descriptives(recs: &[&EvaluationRecord]) -> ModelDescriptives {
    let composites: Vec<f64> = recs.iter().map(|r| r.composite).collect();
    let sample = Sample::new("composite", composites.clone()).ok();
    let composite = sample.as_ref().map(|s| describe(s)).unwrap_or(Descriptives {
        n: 0,
        mean: f64::NAN,
        median: f64::NAN,
        sd: None,
        min: f64::NAN,
        max: f64::NAN,
    });
    let sd = composite.sd;
    let shapiro = if composites.len() >= 3 && composites.len() <= 5000 {
        shapiro_wilk(&composites).ok()
    } else {
        None
    };
    ModelDescriptives {
        msi: sd.map(|s| msi(composite.mean, s)),
        coherence_ratio: sd.map(coherence_ratio),
        shapiro_w: shapiro.map(|s| s.0),
        shapiro_p: shapiro.map(|s| s.1),
        composite,
    }
}

fn comparison_section(
    model_a: &str,
    model_b: &str,
    recs_a: &[&EvaluationRecord],
    recs_b: &[&EvaluationRecord],
) -> ComparisonSection {
    let a = Sample::new(model_a, recs_a.iter().map(|r| r.composite).collect()).ok();
    let b = Sample::new(model_b, recs_b.iter().map(|r| r.composite).collect()).ok();
    let (pooled_t, welch_t, f_test, lev) = match (&a, &b) {
        (Some(a), Some(b)) => (
            t_test_pooled(a, b).ok(),
            t_test_welch(a, b).ok(),
            a.variance()
                .ok()
                .zip(b.variance().ok())
                .and_then(|(va, vb)| f_ratio_from_summary(va, a.n(), vb, b.n()).ok()),
            levene(a, b).ok(),
        ),
        _ => (None, None, None, None),
    };
    // cross-model correlation over shared prompts, paired by prompt id
    let map_a: BTreeMap<&str, f64> =
        recs_a.iter().map(|r| (r.prompt_id.as_str(), r.composite)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in recs_b {
        if let Some(&ca) = map_a.get(r.prompt_id.as_str()) {
            xs.push(ca);
            ys.push(r.composite);
        }
    }
    ComparisonSection {
        models: [model_a.to_string(), model_b.to_string()],
        pooled_t,
        welch_t,
        f_test,
        levene: lev,
        cross_model_r: pearson(&xs, &ys).ok(),
    }
}

fn correlation_section(recs: &[&EvaluationRecord]) -> CorrelationSection {
    let e: Vec<f64> = recs.iter().map(|r| r.composite).collect();
    let t: Vec<f64> = recs.iter().map(|r| r.scores.tox).collect();
    let l: Vec<f64> = recs.iter().map(|r| r.latency).collect();
    CorrelationSection {
        ethics_toxicity: pearson(&e, &t).ok(),
        ethics_toxicity_spearman: spearman(&e, &t).ok(),
        ethics_latency: pearson(&e, &l).ok(),
        toxicity_latency: pearson(&t, &l).ok(),
    }
}

fn regression_section(records: &[EvaluationRecord]) -> Option<RegressionSection> {
    let e: Vec<f64> = records.iter().map(|r| r.composite).collect();
    let t: Vec<f64> = records.iter().map(|r| r.scores.tox).collect();
    let l: Vec<f64> = records.iter().map(|r| r.latency).collect();
    let ols = ols2(&e, &t, &l).ok()?;
    let r = |x: &[f64], y: &[f64]| pearson(x, y).map(|c| c.r).unwrap_or(f64::NAN);
    let matrix = [
        [1.0, r(&e, &t), r(&e, &l)],
        [r(&t, &e), 1.0, r(&t, &l)],
        [r(&l, &e), r(&l, &t), 1.0],
    ];
    Some(RegressionSection {
        ols,
        n: records.len(),
        matrix_labels: ["ethics".into(), "toxicity".into(), "latency".into()],
        matrix,
    })
}

fn divergence_section(
    records: &[EvaluationRecord],
    model_a: &str,
    model_b: &str,
) -> Option<DivergenceSection> {
    let cycles: BTreeSet<u32> = records.iter().map(|r| r.cycle).collect();
    let mut per_cycle = Vec::new();
    let mut unpaired = 0;
    for cycle in cycles {
        let side = |model: &str| {
            records
                .iter()
                .filter(|r| r.cycle == cycle && r.model_id == model)
                .map(|r| (r.prompt_id.clone(), (r.domain, r.composite)))
                .collect::<BTreeMap<_, _>>()
        };
        if let Ok(div) = moral_divergence(&side(model_a), &side(model_b)) {
            per_cycle.push((cycle, div.d_moral));
            unpaired += div.unpaired;
        }
    }
    if per_cycle.is_empty() {
        return None;
    }
    let mean = per_cycle.iter().map(|(_, d)| d).sum::<f64>() / per_cycle.len() as f64;
    Some(DivergenceSection { per_cycle, mean_d_moral: mean, unpaired })
}

/// Builds the figure-analogue data embedded in the report.
fn plot_data(records: &[EvaluationRecord]) -> PlotData {
    let mut by_model: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_model.entry(&r.model_id).or_default().push(r.composite);
    }
    let mut histograms = BTreeMap::new();
    let mut boxes = BTreeMap::new();
    for (model, values) in &by_model {
        let mut bins = vec![0u64; 20];
        for &v in values {
            let idx = ((v * 20.0) as usize).min(19);
            bins[idx] += 1;
        }
        histograms.insert(
            model.to_string(),
            bins.iter()
                .enumerate()
                .map(|(i, &count)| HistBin { lo: i as f64 / 20.0, hi: (i + 1) as f64 / 20.0, count })
                .collect(),
        );
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        boxes.insert(
            model.to_string(),
            BoxStats {
                min: sorted[0],
                q1: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q3: quantile(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
            },
        );
    }
    let stride = (records.len() / SCATTER_CAP).max(1);
    let scatter = records
        .iter()
        .step_by(stride)
        .map(|r| ScatterRow {
            model: r.model_id.clone(),
            ethics: r.composite,
            toxicity: r.scores.tox,
            latency: r.latency,
        })
        .collect();
    PlotData { histograms, boxes, scatter }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[derive(Debug, Deserialize)]
struct Expectations {
    reference: Reference,
    claims: Vec<Claim>,
}

#[derive(Debug, Deserialize)]
struct Reference {
    model_a: RefModel,
    model_b: RefModel,
    stability: Stability,
}

#[derive(Debug, Deserialize)]
struct RefModel {
    safe: u64,
    borderline: u64,
    #[serde(rename = "unsafe")]
    unsafe_: u64,
    mean: f64,
    sd: f64,
}

#[derive(Debug, Deserialize)]
struct Stability {
    model_a: RefSummary,
    model_b: RefSummary,
}

#[derive(Debug, Deserialize)]
struct RefSummary {
    mean: f64,
    sd: f64,
}

#[derive(Debug, Deserialize)]
struct Claim {
    name: String,
    stated: f64,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default)]
    comparison: Option<String>,
    note: String,
}

impl RefModel {
    fn n(&self) -> u64 {
        self.safe + self.borderline + self.unsafe_
    }
}

/// Recomputes every pinned published statistic from its own stated inputs
/// and flags the ones that cannot be reproduced.
pub fn published_consistency() -> Vec<PublishedCheck> {
    let exp: Expectations =
        serde_json::from_str(EMBEDDED_EXPECTATIONS).expect("embedded expectations parse");
    let a = &exp.reference.model_a;
    let b = &exp.reference.model_b;
    let table = Table2x2 {
        a: a.unsafe_,
        b: a.n() - a.unsafe_,
        c: b.unsafe_,
        d: b.n() - b.unsafe_,
    };
    let chi2 = chi2_2x2(&table, false).ok();
    let risk = risk_ratio_arr(&table).ok();
    let pooled = pooled_from_summary(
        a.mean,
        a.sd * a.sd,
        a.n() as usize,
        b.mean,
        b.sd * b.sd,
        b.n() as usize,
    )
    .ok();
    let sa = &exp.reference.stability.model_a;
    let sb = &exp.reference.stability.model_b;
    let welch = welch_from_summary(
        sb.mean,
        sb.sd * sb.sd,
        b.n() as usize,
        sa.mean,
        sa.sd * sa.sd,
        a.n() as usize,
    )
    .ok();
    let f = f_ratio_from_summary(a.sd * a.sd, a.n() as usize, b.sd * b.sd, b.n() as usize).ok();
    // residual variance implied by the stated r_ET and sd of the ethics score
    let r_et = -0.81_f64;
    let implied_residual = (a.sd * a.sd) * (1.0 - r_et * r_et);

    exp.claims
        .iter()
        .map(|claim| {
            let computed = match claim.name.as_str() {
                "chi2" => chi2.map(|c| c.chi2),
                "chi2_p" => chi2.map(|c| c.p),
                "cramers_v" => chi2.map(|c| c.cramers_v),
                "risk_ratio" => risk.map(|r| r.rr),
                "arr_pp" => risk.map(|r| r.arr_pp),
                "msi_model_a" => Some(msi(sa.mean, sa.sd)),
                "msi_model_b" => Some(msi(sb.mean, sb.sd)),
                "coherence_model_a" => Some(coherence_ratio(a.sd)),
                "coherence_model_b" => Some(coherence_ratio(b.sd)),
                "f_ratio" => f.map(|r| r.f),
                "pooled_t" => pooled.map(|t| t.t),
                "welch_t" => welch.map(|t| t.t),
                "f_test_p" => f.map(|r| r.p),
                "residual_variance" => Some(implied_residual),
                _ => None,
            };
            let consistent = computed.map(|c| match claim.comparison.as_deref() {
                Some("below") => c < claim.stated,
                _ => (c - claim.stated).abs() <= claim.tolerance.unwrap_or(0.0),
            });
            PublishedCheck {
                name: claim.name.clone(),
                stated: claim.stated,
                computed,
                consistent,
                note: claim.note.clone(),
            }
        })
        .collect()
}
