//! Batch command implementations behind the `bigroots` binary.
//!
//! Commands: `analyze`, `gen-trace`, `evaluate`, `sweep`. All are
//! deterministic given identical inputs, configuration, and seeds, and all
//! echo the effective configuration into their reports. Configuration
//! precedence is command-line flag over config file over built-in default.
//!
//! Exit codes: 0 success, 1 input error, 2 internal invariant violation.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::detect::median_duration;
use crate::error::{Error, Result};
use crate::eval::{auc, confusion, rates, roc_sweep, straggler_universe, Labels, Method};
use crate::ingest::{
    load_bundle, parse_schedule, write_event_log, write_metrics, write_schedule, TraceBundle,
};
use crate::model::PeerAggregator;
use crate::pcc::pcc_resource_predictions;
use crate::report::{
    index_reports, summarize, AnalysisReport, EvaluationReport, GridSpec, MethodEvaluation,
    StageReport, StragglerReport, SweepMethodSummary, SweepSummary, ToolConfig,
    REPORT_FORMAT_VERSION,
};
use crate::rootcause::{resource_predictions, PreparedBundle};
use crate::synth::{gen_trace, inject, label_tasks, ResponseModel, TraceSpec};

/// Offline root-cause analysis for stragglers in big-data task traces.
#[derive(Debug, Parser)]
#[command(name = "bigroots", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect stragglers in a trace and report root causes per stage.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic trace (events, metrics, ground truth).
    GenTrace(GenTraceArgs),
    /// Score root-cause identification against injected ground truth.
    Evaluate(EvaluateArgs),
    /// Sweep threshold grids over one or more bundles; report ROC and AUC.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodFlag {
    Bigroots,
    Pcc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregatorFlag {
    Mean,
    Median,
}

/// Threshold overrides shared by the analysis commands. Every flag mirrors
/// a config-file key; flags win over the file, the file over defaults.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file with the same keys as these flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub straggler_multiplier: Option<f64>,
    #[arg(long)]
    pub quantile_lambda_q: Option<f64>,
    #[arg(long)]
    pub peer_lambda_p: Option<f64>,
    #[arg(long)]
    pub time_lower_bound: Option<f64>,
    #[arg(long)]
    pub edge_lambda_e: Option<f64>,
    #[arg(long)]
    pub edge_width_ms: Option<i64>,
    #[arg(long, value_enum)]
    pub peer_aggregator: Option<AggregatorFlag>,
    /// Enable or disable the self-caused-utilization filter.
    #[arg(long)]
    pub edge_detection: Option<bool>,
    #[arg(long)]
    pub exempt_nopref_locality: Option<bool>,
    #[arg(long)]
    pub pcc_lambda_ca: Option<f64>,
    #[arg(long)]
    pub pcc_lambda_cq: Option<f64>,
}

impl ConfigArgs {
    /// Resolve flag > file > default into one validated config.
    pub fn resolve(&self) -> Result<ToolConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::parse(path.display().to_string(), format!("cannot read: {e}"))
                })?;
                ToolConfig::from_json(&text)?
            }
            None => ToolConfig::default(),
        };
        if let Some(v) = self.straggler_multiplier {
            cfg.analysis.straggler_multiplier = v;
        }
        if let Some(v) = self.quantile_lambda_q {
            cfg.analysis.quantile_lambda_q = v;
        }
        if let Some(v) = self.peer_lambda_p {
            cfg.analysis.peer_lambda_p = v;
        }
        if let Some(v) = self.time_lower_bound {
            cfg.analysis.time_lower_bound = v;
        }
        if let Some(v) = self.edge_lambda_e {
            cfg.analysis.edge_lambda_e = v;
        }
        if let Some(v) = self.edge_width_ms {
            cfg.analysis.edge_width_ms = v;
        }
        if let Some(v) = self.peer_aggregator {
            cfg.analysis.peer_aggregator = match v {
                AggregatorFlag::Mean => PeerAggregator::Mean,
                AggregatorFlag::Median => PeerAggregator::Median,
            };
        }
        if let Some(v) = self.edge_detection {
            cfg.analysis.edge_detection = v;
        }
        if let Some(v) = self.exempt_nopref_locality {
            cfg.analysis.exempt_nopref_locality = v;
        }
        if let Some(v) = self.pcc_lambda_ca {
            cfg.pcc.lambda_ca = v;
        }
        if let Some(v) = self.pcc_lambda_cq {
            cfg.pcc.lambda_cq = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Task event log (JSON-lines).
    #[arg(long)]
    pub events: PathBuf,
    /// Metrics log (CSV). Analysis degrades gracefully when absent.
    #[arg(long)]
    pub metrics: PathBuf,
    /// Report output path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// Trace spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Anomaly schedule (CSV) to inject; omitted means a clean trace.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Output directory for events.jsonl, metrics.csv, truth.csv, spec.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Task slowdown per unit of cpu anomaly overlap.
    #[arg(long, default_value_t = ResponseModel::default().cpu_factor)]
    pub cpu_factor: f64,
    #[arg(long, default_value_t = ResponseModel::default().disk_factor)]
    pub disk_factor: f64,
    #[arg(long, default_value_t = ResponseModel::default().network_factor)]
    pub network_factor: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub metrics: PathBuf,
    /// Ground-truth schedule (CSV).
    #[arg(long)]
    pub truth: PathBuf,
    /// Which identification method(s) to score.
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodFlag,
    /// Threshold grid file (JSON); defaults to the built-in grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Bundle directory containing events.jsonl, metrics.csv, truth.csv
    /// (as written by gen-trace). Repeat for multiple seeds.
    #[arg(long, required = true)]
    pub bundle: Vec<PathBuf>,
    /// Threshold grid file (JSON); defaults to the built-in grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Output directory for roc_points.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Run a parsed command; the binary maps the error to an exit code.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(&args),
        Command::GenTrace(args) => cmd_gen_trace(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

fn load_bundle_lenient(
    events: &Path,
    metrics: &Path,
    warnings: &mut Vec<String>,
) -> Result<TraceBundle> {
    if metrics.exists() {
        load_bundle(events, metrics)
    } else {
        let warning = format!(
            "metrics file {} not found; resource features will be missing",
            metrics.display()
        );
        eprintln!("warning: {warning}");
        warnings.push(warning);
        let file = fs::File::open(events).map_err(|e| {
            Error::parse(events.display().to_string(), format!("cannot open: {e}"))
        })?;
        let tasks = crate::ingest::parse_event_log(file)?;
        if tasks.is_empty() {
            return Err(Error::EmptyInput(format!(
                "event log {} contains no tasks",
                events.display()
            )));
        }
        TraceBundle::new(tasks, Default::default())
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let mut warnings = Vec::new();
    let bundle = load_bundle_lenient(&args.events, &args.metrics, &mut warnings)?;
    for node in bundle.nodes_without_metrics() {
        warnings.push(format!(
            "node {node} has tasks but no metric series; its resource features are missing"
        ));
    }

    let prepared = PreparedBundle::prepare(&bundle, &cfg.analysis)?;
    let reports = index_reports(
        prepared.analyze(cfg.analysis.quantile_lambda_q, cfg.analysis.peer_lambda_p),
    );

    let mut stages = Vec::new();
    for (stage_id, tasks) in bundle.stages() {
        let median = median_duration(tasks)?;
        let mut stragglers = Vec::new();
        for task in tasks {
            if let Some(report) = reports.get(task.task_id()) {
                stragglers.push(StragglerReport {
                    task_id: report.task_id.clone(),
                    node_id: task.node_id().to_string(),
                    duration_ms: task.duration(),
                    straggler_scale: report.straggler_scale,
                    causes: report.causes.clone(),
                    filtered: report.filtered.clone(),
                });
            }
        }
        stragglers.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        stages.push(StageReport {
            stage_id: stage_id.clone(),
            task_count: tasks.len(),
            median_duration_ms: median,
            stragglers,
        });
    }

    let summary = summarize(&stages);
    let report = AnalysisReport {
        format_version: REPORT_FORMAT_VERSION,
        config: cfg,
        warnings,
        stages,
        summary,
    };
    write_json(&args.out, &report)
}

pub fn cmd_gen_trace(args: &GenTraceArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec).map_err(|e| {
        Error::parse(args.spec.display().to_string(), format!("cannot read: {e}"))
    })?;
    let mut spec: TraceSpec = serde_json::from_str(&text)
        .map_err(|e| Error::parse(args.spec.display().to_string(), e.to_string()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let response = ResponseModel {
        cpu_factor: args.cpu_factor,
        disk_factor: args.disk_factor,
        network_factor: args.network_factor,
    };

    let mut bundle = gen_trace(&spec)?;
    let schedule = match &args.schedule {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| {
                Error::parse(path.display().to_string(), format!("cannot open: {e}"))
            })?;
            let schedule = parse_schedule(file)?;
            bundle = inject(&bundle, &schedule, &response)?;
            schedule
        }
        None => Default::default(),
    };

    fs::create_dir_all(&args.out_dir)?;
    let events = fs::File::create(args.out_dir.join("events.jsonl"))?;
    write_event_log(&bundle, events)?;
    let metrics = fs::File::create(args.out_dir.join("metrics.csv"))?;
    write_metrics(bundle.metrics(), metrics)?;
    let truth = fs::File::create(args.out_dir.join("truth.csv"))?;
    write_schedule(&schedule, truth)?;
    write_json(&args.out_dir.join("spec.json"), &spec)?;
    Ok(())
}

struct MethodScore {
    name: &'static str,
    evaluation: MethodEvaluation,
}

fn score_method(
    bundle: &TraceBundle,
    labels: &Labels,
    method: Method,
    cfg: &ToolConfig,
    grid: &GridSpec,
) -> Result<MethodScore> {
    let prepared = PreparedBundle::prepare(bundle, &cfg.analysis)?;
    let universe = straggler_universe(&prepared);
    let predicted = match method {
        Method::Bigroots => {
            let reports = prepared
                .analyze(cfg.analysis.quantile_lambda_q, cfg.analysis.peer_lambda_p);
            resource_predictions(&reports)
        }
        Method::Pcc => {
            let mut vectors_by_stage = BTreeMap::new();
            for prep in prepared.stages() {
                vectors_by_stage.insert(prep.stage_id().to_string(), prep.vectors().clone());
            }
            pcc_resource_predictions(
                bundle,
                &vectors_by_stage,
                &cfg.pcc,
                cfg.analysis.straggler_multiplier,
            )?
        }
    };
    let matrix = confusion(&predicted, labels, &universe)?;
    let sweep_grid = match method {
        Method::Bigroots => grid.bigroots_grid(),
        Method::Pcc => grid.pcc_grid(),
    };
    let roc = roc_sweep(bundle, labels, method, &sweep_grid, &cfg.analysis)?;
    let area = auc(&roc)?;
    Ok(MethodScore {
        name: method.as_str(),
        evaluation: MethodEvaluation {
            confusion: matrix,
            rates: rates(&matrix),
            roc,
            auc: area,
        },
    })
}

fn load_grid(path: &Option<PathBuf>) -> Result<GridSpec> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::parse(path.display().to_string(), format!("cannot read: {e}"))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
        }
        None => Ok(GridSpec::default()),
    }
}

fn methods_for(flag: MethodFlag) -> Vec<Method> {
    match flag {
        MethodFlag::Bigroots => vec![Method::Bigroots],
        MethodFlag::Pcc => vec![Method::Pcc],
        MethodFlag::Both => vec![Method::Bigroots, Method::Pcc],
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let grid = load_grid(&args.grid)?;
    let bundle = load_bundle(&args.events, &args.metrics)?;
    let truth_file = fs::File::open(&args.truth).map_err(|e| {
        Error::parse(args.truth.display().to_string(), format!("cannot open: {e}"))
    })?;
    let schedule = parse_schedule(truth_file)?;
    let labels = label_tasks(&bundle, &schedule);

    let prepared = PreparedBundle::prepare(&bundle, &cfg.analysis)?;
    let universe = straggler_universe(&prepared);
    let positive_pairs = universe
        .iter()
        .filter(|(task, kind)| {
            labels
                .get(task)
                .map(|kinds| kinds.contains(kind))
                .unwrap_or(false)
        })
        .count();
    drop(prepared);

    let mut methods = BTreeMap::new();
    for method in methods_for(args.method) {
        let score = score_method(&bundle, &labels, method, &cfg, &grid)?;
        methods.insert(score.name.to_string(), score.evaluation);
    }
    let auc_difference = match (methods.get("bigroots"), methods.get("pcc")) {
        (Some(b), Some(p)) => Some(b.auc - p.auc),
        _ => None,
    };

    let report = EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        config: cfg,
        universe_size: universe.len(),
        positive_pairs,
        methods,
        auc_difference,
    };
    write_json(&args.out, &report)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let grid = load_grid(&args.grid)?;
    fs::create_dir_all(&args.out)?;

    let points_path = args.out.join("roc_points.csv");
    let mut writer = csv::Writer::from_path(&points_path)
        .map_err(|e| Error::parse(points_path.display().to_string(), e.to_string()))?;
    writer
        .write_record([
            "bundle",
            "method",
            "threshold_a",
            "threshold_b",
            "fpr",
            "tpr",
        ])
        .map_err(|e| Error::Internal(format!("roc table write failed: {e}")))?;

    let mut per_method: BTreeMap<&'static str, BTreeMap<String, f64>> = BTreeMap::new();
    let mut bundle_names = Vec::new();
    for dir in &args.bundle {
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        bundle_names.push(name.clone());
        let bundle = load_bundle(&dir.join("events.jsonl"), &dir.join("metrics.csv"))?;
        let truth_path = dir.join("truth.csv");
        let truth_file = fs::File::open(&truth_path).map_err(|e| {
            Error::parse(truth_path.display().to_string(), format!("cannot open: {e}"))
        })?;
        let schedule = parse_schedule(truth_file)?;
        let labels = label_tasks(&bundle, &schedule);

        for method in [Method::Bigroots, Method::Pcc] {
            let sweep_grid = match method {
                Method::Bigroots => grid.bigroots_grid(),
                Method::Pcc => grid.pcc_grid(),
            };
            let points = roc_sweep(&bundle, &labels, method, &sweep_grid, &cfg.analysis)?;
            for p in &points {
                writer
                    .write_record([
                        name.clone(),
                        method.as_str().to_string(),
                        p.thresholds[0].to_string(),
                        p.thresholds[1].to_string(),
                        p.fpr.to_string(),
                        p.tpr.to_string(),
                    ])
                    .map_err(|e| Error::Internal(format!("roc table write failed: {e}")))?;
            }
            let area = auc(&points)?;
            per_method
                .entry(method.as_str())
                .or_default()
                .insert(name.clone(), area);
        }
    }
    writer
        .flush()
        .map_err(|e| Error::Internal(format!("roc table flush failed: {e}")))?;

    let mut methods = BTreeMap::new();
    for (name, per_bundle) in per_method {
        let mean = per_bundle.values().sum::<f64>() / per_bundle.len() as f64;
        methods.insert(
            name.to_string(),
            SweepMethodSummary {
                per_bundle_auc: per_bundle,
                mean_auc: mean,
            },
        );
    }
    let summary = SweepSummary {
        format_version: REPORT_FORMAT_VERSION,
        config: cfg,
        grid,
        bundles: bundle_names,
        methods,
    };
    write_json(&args.out.join("summary.json"), &summary)
}

/// Exit code for an error: input problems are 1, internal invariant
/// violations are 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Internal(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_overrides_file_overrides_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, r#"{"peer_lambda_p": 2.0, "quantile_lambda_q": 0.8}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            peer_lambda_p: Some(3.0),
            ..ConfigArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.analysis.peer_lambda_p, 3.0); // flag wins
        assert_eq!(cfg.analysis.quantile_lambda_q, 0.8); // file wins
        assert_eq!(cfg.analysis.straggler_multiplier, 1.5); // default
    }

    #[test]
    fn invalid_config_rejected() {
        let args = ConfigArgs {
            quantile_lambda_q: Some(1.5),
            ..ConfigArgs::default()
        };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn exit_codes_distinguish_input_from_internal_errors() {
        assert_eq!(exit_code(&Error::EmptyInput("x".into())), 1);
        assert_eq!(exit_code(&Error::parse("f", "bad")), 1);
        assert_eq!(exit_code(&Error::Internal("bug".into())), 2);
    }
}
