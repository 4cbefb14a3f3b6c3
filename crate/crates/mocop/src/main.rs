//! Command-line entry point: run the closed loop, analyze a record log, or
//! emit reports from a stored analysis.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mocop::core::RunConfig;
use mocop::pipeline::{analyze_log, emit, run, StatReport};

#[derive(Parser)]
#[command(name = "mocop", version, about = "Closed-loop moral-consistency evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the evaluation loop against the configured endpoints.
    Run(RunArgs),
    /// Shorthand for `run --offline`: every endpoint is simulated.
    Simulate(RunArgs),
    /// Analyze a record log into a structured report (`analysis.json`).
    Analyze {
        /// Path to `records.jsonl`.
        log: PathBuf,
        /// Output directory; defaults to the log's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit summary and CSV files from a stored analysis.
    Report {
        /// Path to `analysis.json`.
        analysis: PathBuf,
        /// Output directory; defaults to `report` beside the analysis.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Force all endpoints into simulated mode.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long)]
    prompts: Option<usize>,
    /// Output directory (overrides config and MOCOP_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rescale semantic safety onto the full unit interval.
    #[arg(long)]
    rescale_sem: bool,
    /// Use the verbatim descent sign for the theta update.
    #[arg(long)]
    literal_descent: bool,
    /// Override any config key via a dotted path, e.g.
    /// `--set feedback.eta=0.02` or `--set endpoints=[...]` (JSON values).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run_command(args, false),
        Command::Simulate(args) => run_command(args, true),
        Command::Analyze { log, out } => analyze_command(&log, out),
        Command::Report { analysis, out } => report_command(&analysis, out),
    }
}

fn run_command(args: RunArgs, force_offline: bool) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(&path.display().to_string())
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    config = apply_overrides(config, &args.set)?;
    if force_offline || args.offline {
        config.offline = true;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(cycles) = args.cycles {
        config.n_cycles = cycles;
    }
    if let Some(prompts) = args.prompts {
        config.n_prompts = prompts;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.display().to_string());
    }
    if args.rescale_sem {
        config.scoring.rescale_sem = true;
    }
    if args.literal_descent {
        config.feedback.literal_descent = true;
    }

    let output = run(config)?;
    let m = &output.manifest;
    println!("run {} finished: {} cycles, {} records", m.run_id, m.cycles_completed, m.records_written);
    println!(
        "convergence: {:?}{}",
        m.convergence,
        m.converged_cycle.map(|c| format!(" at cycle {c}")).unwrap_or_default()
    );
    println!("outputs in {}", output.out_dir.display());
    Ok(())
}

/// Applies `key.path=value` overrides through the JSON representation so any
/// config field is reachable; values parse as JSON, falling back to strings.
fn apply_overrides(config: RunConfig, sets: &[String]) -> Result<RunConfig> {
    if sets.is_empty() {
        return Ok(config);
    }
    let mut value = serde_json::to_value(&config)?;
    for entry in sets {
        let Some((path, raw)) = entry.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {entry:?}");
        };
        let parsed = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut cursor = &mut value;
        let segments: Vec<&str> = path.split('.').collect();
        for (i, segment) in segments.iter().enumerate() {
            let last = i + 1 == segments.len();
            cursor = match cursor {
                serde_json::Value::Object(map) => {
                    if last {
                        map.insert(segment.to_string(), parsed.clone());
                        break;
                    }
                    map.get_mut(*segment)
                        .with_context(|| format!("unknown config key {path:?}"))?
                }
                serde_json::Value::Array(items) => {
                    let idx: usize = segment
                        .parse()
                        .with_context(|| format!("non-numeric index in {path:?}"))?;
                    let slot = items
                        .get_mut(idx)
                        .with_context(|| format!("index out of range in {path:?}"))?;
                    if last {
                        *slot = parsed.clone();
                        break;
                    }
                    slot
                }
                _ => bail!("cannot descend into scalar at {segment:?} in {path:?}"),
            };
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn analyze_command(log: &PathBuf, out: Option<PathBuf>) -> Result<()> {
    let report = analyze_log(log)?;
    let out_dir = out
        .or_else(|| log.parent().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("analysis.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!(
        "analyzed {} records from {} models -> {}",
        report.n_records,
        report.models.len(),
        path.display()
    );
    Ok(())
}

fn report_command(analysis: &PathBuf, out: Option<PathBuf>) -> Result<()> {
    let raw = std::fs::read_to_string(analysis)
        .with_context(|| format!("reading {}", analysis.display()))?;
    let report: StatReport = serde_json::from_str(&raw)?;
    let out_dir = out.unwrap_or_else(|| {
        analysis
            .parent()
            .map(|p| p.join("report"))
            .unwrap_or_else(|| PathBuf::from("report"))
    });
    let written = emit(&report, &out_dir)?;
    println!("wrote {} files to {}", written.len(), out_dir.display());
    Ok(())
}
