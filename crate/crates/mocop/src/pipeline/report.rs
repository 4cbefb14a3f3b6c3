//! Report emission: a human-readable summary plus CSV tables and plot-data
//! files, all pure functions of the analysis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::analyze::StatReport;
use super::{storage, PipelineError};

/// Formats a float losslessly (shortest round-trip representation), so CSV
/// consumers recover the exact report values.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Rounds for the human-facing summary; the CSVs keep full precision.
fn opt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, PipelineError> {
    let path = dir.join(name);
    fs::write(&path, content.as_bytes()).map_err(|e| storage(&path, e))?;
    Ok(path)
}

/// Emits `summary.md`, the four CSV tables, and the five plot-data CSVs
/// into `out_dir`, returning the written paths.
pub fn emit(report: &StatReport, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(out_dir).map_err(|e| storage(out_dir, e))?;
    let mut written = Vec::new();
    written.push(write_file(out_dir, "table1.csv", &table1(report))?);
    written.push(write_file(out_dir, "table2.csv", &table2(report))?);
    written.push(write_file(out_dir, "table3.csv", &table3(report))?);
    written.push(write_file(out_dir, "table4.csv", &table4(report))?);
    written.push(write_file(out_dir, "safety_bars.csv", &safety_bars(report))?);
    written.push(write_file(out_dir, "score_hist.csv", &score_hist(report))?);
    written.push(write_file(out_dir, "box_stats.csv", &box_stats(report))?);
    written.push(write_file(out_dir, "scatter_pairs.csv", &scatter_pairs(report))?);
    written.push(write_file(out_dir, "corr_heatmap.csv", &corr_heatmap(report))?);
    written.push(write_file(out_dir, "summary.md", &summary_md(report))?);
    Ok(written)
}

fn table1(r: &StatReport) -> String {
    let mut out = String::from(
        "model,n,safe,borderline,unsafe,prop_safe,prop_borderline,prop_unsafe,wilson_low,wilson_high\n",
    );
    for (model, row) in &r.category.per_model {
        let _ = writeln!(
            out,
            "{model},{},{},{},{},{},{},{},{},{}",
            row.n,
            row.safe,
            row.borderline,
            row.unsafe_,
            num(row.prop_safe),
            num(row.prop_borderline),
            num(row.prop_unsafe),
            opt(row.unsafe_wilson_low),
            opt(row.unsafe_wilson_high),
        );
    }
    let p = &r.category.pooled;
    let _ = writeln!(
        out,
        "pooled,{},{},{},{},{},{},{},{},{}",
        p.n,
        p.safe,
        p.borderline,
        p.unsafe_,
        num(p.prop_safe),
        num(p.prop_borderline),
        num(p.prop_unsafe),
        opt(p.unsafe_wilson_low),
        opt(p.unsafe_wilson_high),
    );
    out
}

fn table2(r: &StatReport) -> String {
    let mut out =
        String::from("model,n,mean,median,sd,min,max,shapiro_w,shapiro_p\n");
    for (model, d) in &r.descriptives {
        let c = &d.composite;
        let _ = writeln!(
            out,
            "{model},{},{},{},{},{},{},{},{}",
            c.n,
            num(c.mean),
            num(c.median),
            opt(c.sd),
            num(c.min),
            num(c.max),
            opt(d.shapiro_w),
            opt(d.shapiro_p),
        );
    }
    out
}

fn table3(r: &StatReport) -> String {
    let mut out = String::from("model,msi,coherence_ratio\n");
    for (model, d) in &r.descriptives {
        let _ = writeln!(out, "{model},{},{}", opt(d.msi), opt(d.coherence_ratio));
    }
    out
}

fn table4(r: &StatReport) -> String {
    let mut out = String::from(
        "model,r_et,p_et,rho_et,p_rho_et,r_el,p_el,r_tl,p_tl,n\n",
    );
    for (model, c) in &r.correlations {
        let _ = writeln!(
            out,
            "{model},{},{},{},{},{},{},{},{},{}",
            opt(c.ethics_toxicity.map(|x| x.r)),
            opt(c.ethics_toxicity.map(|x| x.p)),
            opt(c.ethics_toxicity_spearman.map(|x| x.r)),
            opt(c.ethics_toxicity_spearman.map(|x| x.p)),
            opt(c.ethics_latency.map(|x| x.r)),
            opt(c.ethics_latency.map(|x| x.p)),
            opt(c.toxicity_latency.map(|x| x.r)),
            opt(c.toxicity_latency.map(|x| x.p)),
            c.ethics_toxicity.map(|x| x.n).unwrap_or(0),
        );
    }
    out
}

fn safety_bars(r: &StatReport) -> String {
    let mut out = String::from("model,category,count,proportion\n");
    for (model, row) in &r.category.per_model {
        for (cat, count, prop) in [
            ("safe", row.safe, row.prop_safe),
            ("borderline", row.borderline, row.prop_borderline),
            ("unsafe", row.unsafe_, row.prop_unsafe),
        ] {
            let _ = writeln!(out, "{model},{cat},{count},{}", num(prop));
        }
    }
    out
}

fn score_hist(r: &StatReport) -> String {
    let mut out = String::from("model,bin_lo,bin_hi,count\n");
    for (model, bins) in &r.plots.histograms {
        for b in bins {
            let _ = writeln!(out, "{model},{},{},{}", num(b.lo), num(b.hi), b.count);
        }
    }
    out
}

fn box_stats(r: &StatReport) -> String {
    let mut out = String::from("model,min,q1,median,q3,max\n");
    for (model, b) in &r.plots.boxes {
        let _ = writeln!(
            out,
            "{model},{},{},{},{},{}",
            num(b.min),
            num(b.q1),
            num(b.median),
            num(b.q3),
            num(b.max),
        );
    }
    out
}

fn scatter_pairs(r: &StatReport) -> String {
    let mut out = String::from("model,ethics,toxicity,latency\n");
    for row in &r.plots.scatter {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.model,
            num(row.ethics),
            num(row.toxicity),
            num(row.latency),
        );
    }
    out
}

fn corr_heatmap(r: &StatReport) -> String {
    let mut out = String::from("var_row,var_col,r\n");
    if let Some(reg) = &r.regression {
        for (i, row_label) in reg.matrix_labels.iter().enumerate() {
            for (j, col_label) in reg.matrix_labels.iter().enumerate() {
                let _ = writeln!(out, "{row_label},{col_label},{}", num(reg.matrix[i][j]));
            }
        }
    }
    out
}

fn summary_md(r: &StatReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation summary\n");
    if let Some(run_id) = &r.run_id {
        let _ = writeln!(out, "Run `{run_id}`.");
    }
    let _ = writeln!(
        out,
        "Models: {}. Records analyzed: {} over cycles {:?}.",
        r.models.join(", "),
        r.n_records,
        r.cycles,
    );
    if !r.dropped_incomplete_cycles.is_empty() {
        let _ = writeln!(
            out,
            "Dropped incomplete cycles: {:?}.",
            r.dropped_incomplete_cycles
        );
    }

    let _ = writeln!(out, "\n## Safety categories\n");
    let _ = writeln!(out, "| model | n | safe | borderline | unsafe | unsafe % | 95% Wilson |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for (model, row) in &r.category.per_model {
        let _ = writeln!(
            out,
            "| {model} | {} | {} | {} | {} | {:.2} | ({}, {}) |",
            row.n,
            row.safe,
            row.borderline,
            row.unsafe_,
            100.0 * row.prop_unsafe,
            opt4(row.unsafe_wilson_low),
            opt4(row.unsafe_wilson_high),
        );
    }
    match (&r.category.chi2, &r.category.risk) {
        (Some(chi2), Some(risk)) => {
            let _ = writeln!(
                out,
                "\nUnsafe-rate comparison (first two models, n = {}): chi2 = {:.4} \
                 (df = {}, p = {:.3}), Cramer's V = {:.4}, RR = {:.4}, ARR = {:.4} pp.",
                r.category.pooled.n, chi2.chi2, chi2.df, chi2.p, chi2.cramers_v, risk.rr,
                risk.arr_pp,
            );
        }
        _ => {
            let _ = writeln!(out, "\nUnsafe-rate comparison: not applicable (needs two models).");
        }
    }

    let _ = writeln!(out, "\n## Score distributions\n");
    let _ = writeln!(out, "| model | n | mean | median | sd | MSI | coherence | Shapiro-Wilk |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
    for (model, d) in &r.descriptives {
        let c = &d.composite;
        let _ = writeln!(
            out,
            "| {model} | {} | {:.4} | {:.4} | {} | {} | {} | W = {}, p = {} |",
            c.n,
            c.mean,
            c.median,
            opt4(c.sd),
            opt4(d.msi),
            opt4(d.coherence_ratio),
            opt4(d.shapiro_w),
            opt4(d.shapiro_p),
        );
    }

    let _ = writeln!(out, "\n## Cross-model comparison\n");
    match &r.comparisons {
        Some(c) => {
            let _ = writeln!(out, "Between {} and {}:", c.models[0], c.models[1]);
            if let Some(t) = &c.pooled_t {
                let _ = writeln!(out, "- pooled t = {:.4} (df = {:.0}, p = {:.3})", t.t, t.df, t.p);
            }
            if let Some(t) = &c.welch_t {
                let _ = writeln!(out, "- Welch t = {:.4} (df = {:.1}, p = {:.3})", t.t, t.df, t.p);
            }
            if let Some(f) = &c.f_test {
                let _ = writeln!(out, "- variance ratio F = {:.4} (p = {:.3})", f.f, f.p);
            }
            if let Some(f) = &c.levene {
                let _ = writeln!(out, "- Levene F = {:.4} (p = {:.3})", f.f, f.p);
            }
            if let Some(x) = &c.cross_model_r {
                let _ = writeln!(
                    out,
                    "- cross-model ethics correlation r = {:.4} over {} shared prompts",
                    x.r, x.n
                );
            }
        }
        None => {
            let _ = writeln!(out, "Not applicable: the log contains a single model.");
        }
    }

    let _ = writeln!(out, "\n## Divergence\n");
    match &r.divergence {
        Some(d) => {
            let _ = writeln!(
                out,
                "Mean D_moral = {} over {} cycles ({} unpaired prompts).",
                opt4(Some(d.mean_d_moral)),
                d.per_cycle.len(),
                d.unpaired,
            );
        }
        None => {
            let _ = writeln!(out, "Not applicable: divergence needs two models with shared prompts.");
        }
    }

    let _ = writeln!(out, "\n## Correlation and regression\n");
    for (model, c) in &r.correlations {
        if let Some(et) = &c.ethics_toxicity {
            let _ = writeln!(
                out,
                "- {model}: r_ET = {:.4} (p = {:.3}, n = {}), r_EL = {}, r_TL = {}",
                et.r,
                et.p,
                et.n,
                opt4(c.ethics_latency.map(|x| x.r)),
                opt4(c.toxicity_latency.map(|x| x.r)),
            );
        }
    }
    match &r.regression {
        Some(reg) => {
            let o = &reg.ols;
            let _ = writeln!(
                out,
                "\nPooled OLS (ethics on toxicity and latency, n = {}): gamma0 = {:.4}, \
                 gamma1 = {:.4}, gamma2 = {:.4}, residual variance = {:.5}, VIF = ({:.3}, {:.3}).",
                reg.n, o.gamma0, o.gamma1, o.gamma2, o.residual_variance, o.vif1, o.vif2,
            );
        }
        None => {
            let _ = writeln!(out, "\nPooled OLS: not applicable (insufficient data).");
        }
    }

    let _ = writeln!(out, "\n## Consistency with the published statistics\n");
    let _ = writeln!(out, "| statistic | stated | recomputed | verdict |");
    let _ = writeln!(out, "|---|---|---|---|");
    for check in &r.published_consistency {
        let verdict = match check.consistent {
            Some(true) => "consistent",
            Some(false) => "inconsistent",
            None => "not derivable",
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {verdict} |",
            check.name,
            num(check.stated),
            opt4(check.computed),
        );
    }
    let _ = writeln!(out, "\nNotes:");
    for check in &r.published_consistency {
        if check.consistent == Some(false) {
            let _ = writeln!(out, "- {}: {}", check.name, check.note);
        }
    }
    out
}
