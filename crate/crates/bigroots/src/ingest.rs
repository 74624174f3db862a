//! Trace ingestion: the task event log (JSON-lines), the metrics log (CSV),
//! and the ground-truth schedule (CSV), plus the writers that round-trip
//! each format.
//!
//! Format notes (version 1):
//! - Event log: UTF-8 JSON-lines, one task object per line, keys as in
//!   [`TaskRecordInit`]. Missing counters default to 0, missing locality to
//!   `NOPREF`, unknown keys are ignored, blank lines are skipped.
//! - Metrics log: UTF-8 CSV with header `timestamp_ms,node_id,kind,value`,
//!   `kind` one of `cpu|disk|network`. Rows need not be globally sorted but
//!   must be sorted per (node, kind) series.
//! - Schedule: UTF-8 CSV with header `node_id,kind,start_ms,end_ms,magnitude`.
//!
//! Task timestamps and metric timestamps must share one trace epoch; this
//! crate never re-aligns clocks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    GroundTruthSchedule, MetricKind, MetricSeries, MetricsIndex, NodeId, Sample, ScheduleEntry,
    StageId, TaskRecord, TaskRecordInit, DEFAULT_SAMPLE_PERIOD_MS,
};

/// A fully loaded trace: tasks grouped by stage plus the metrics index.
///
/// Nodes that host tasks but have no metric series at all are listed in
/// `nodes_without_metrics`; their tasks still get framework features, with
/// resource features marked missing.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBundle {
    stages: BTreeMap<StageId, Vec<TaskRecord>>,
    metrics: MetricsIndex,
    nodes_without_metrics: BTreeSet<NodeId>,
    epoch_ms: i64,
}

impl TraceBundle {
    pub fn new(tasks: Vec<TaskRecord>, metrics: MetricsIndex) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::EmptyInput("trace has no tasks".into()));
        }
        let mut seen = BTreeSet::new();
        let mut stages: BTreeMap<StageId, Vec<TaskRecord>> = BTreeMap::new();
        let mut epoch_ms = i64::MAX;
        for task in tasks {
            if !seen.insert(task.task_id().to_string()) {
                return Err(Error::invalid(
                    "trace bundle",
                    format!("duplicate task_id {}", task.task_id()),
                ));
            }
            epoch_ms = epoch_ms.min(task.start_time());
            stages
                .entry(task.stage_id().to_string())
                .or_default()
                .push(task);
        }
        let nodes_with_metrics: BTreeSet<&NodeId> = metrics.keys().map(|(n, _)| n).collect();
        let mut nodes_without_metrics = BTreeSet::new();
        for tasks in stages.values() {
            for task in tasks {
                if !nodes_with_metrics.contains(&task.node_id().to_string()) {
                    nodes_without_metrics.insert(task.node_id().to_string());
                }
            }
        }
        for series in metrics.values() {
            if let Some(first) = series.samples().first() {
                epoch_ms = epoch_ms.min(first.timestamp_ms);
            }
        }
        Ok(TraceBundle {
            stages,
            metrics,
            nodes_without_metrics,
            epoch_ms,
        })
    }

    /// Stages in id order; every group is non-empty by construction.
    pub fn stages(&self) -> impl Iterator<Item = (&StageId, &[TaskRecord])> {
        self.stages.iter().map(|(id, ts)| (id, ts.as_slice()))
    }

    pub fn stage(&self, stage_id: &str) -> Option<&[TaskRecord]> {
        self.stages.get(stage_id).map(|v| v.as_slice())
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.stages.values().flatten()
    }

    pub fn task_count(&self) -> usize {
        self.stages.values().map(Vec::len).sum()
    }

    pub fn metrics(&self) -> &MetricsIndex {
        &self.metrics
    }

    pub fn series(&self, node_id: &str, kind: MetricKind) -> Option<&MetricSeries> {
        self.metrics.get(&(node_id.to_string(), kind))
    }

    pub fn nodes_without_metrics(&self) -> &BTreeSet<NodeId> {
        &self.nodes_without_metrics
    }

    /// Earliest timestamp seen across tasks and metrics.
    pub fn epoch_ms(&self) -> i64 {
        self.epoch_ms
    }

    /// Latest metric timestamp, if any series exists.
    pub fn metrics_horizon_ms(&self) -> Option<i64> {
        self.metrics
            .values()
            .filter_map(|s| s.samples().last().map(|x| x.timestamp_ms))
            .max()
    }
}

/// Parse the JSON-lines event log. Records are returned in file order;
/// blank lines are skipped.
pub fn parse_event_log<R: Read>(input: R) -> Result<Vec<TaskRecord>> {
    let reader = BufReader::new(input);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let init: TaskRecordInit = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("event log line {line_no}"), e.to_string()))?;
        records.push(TaskRecord::new(init)?);
    }
    Ok(records)
}

#[derive(Debug, Deserialize)]
struct MetricRow {
    timestamp_ms: i64,
    node_id: String,
    kind: String,
    value: f64,
}

/// Parse the metrics CSV into one series per (node, kind).
///
/// The nominal sampling period of each series is inferred as the median
/// inter-sample gap (1000 ms when a series has fewer than two samples).
pub fn parse_metrics<R: Read>(input: R) -> Result<MetricsIndex> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse("metrics header", e.to_string()))?;
        let expected = ["timestamp_ms", "node_id", "kind", "value"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::parse(
                "metrics header",
                format!("expected {expected:?}, got {headers:?}"),
            ));
        }
    }

    let mut buckets: BTreeMap<(NodeId, MetricKind), Vec<Sample>> = BTreeMap::new();
    for (idx, row) in reader.deserialize::<MetricRow>().enumerate() {
        let row_no = idx + 2; // header is row 1
        let row = row.map_err(|e| Error::parse(format!("metrics row {row_no}"), e.to_string()))?;
        let kind = MetricKind::parse(&row.kind)
            .map_err(|e| Error::parse(format!("metrics row {row_no}"), e.to_string()))?;
        crate::model::validate_sample_value(&row.node_id, kind, row.timestamp_ms, row.value)
            .map_err(|e| Error::parse(format!("metrics row {row_no}"), e.to_string()))?;
        let bucket = buckets.entry((row.node_id.clone(), kind)).or_default();
        if let Some(last) = bucket.last() {
            if row.timestamp_ms <= last.timestamp_ms {
                return Err(Error::parse(
                    format!("metrics row {row_no}"),
                    format!(
                        "{}/{kind}: timestamp {} not after previous {}",
                        row.node_id, row.timestamp_ms, last.timestamp_ms
                    ),
                ));
            }
        }
        bucket.push(Sample {
            timestamp_ms: row.timestamp_ms,
            value: row.value,
        });
    }

    let mut metrics = MetricsIndex::new();
    for ((node_id, kind), samples) in buckets {
        let period = median_gap(&samples).unwrap_or(DEFAULT_SAMPLE_PERIOD_MS);
        let series = MetricSeries::new(node_id.clone(), kind, samples, period)?;
        metrics.insert((node_id, kind), series);
    }
    Ok(metrics)
}

fn median_gap(samples: &[Sample]) -> Option<i64> {
    if samples.len() < 2 {
        return None;
    }
    let mut gaps: Vec<i64> = samples
        .windows(2)
        .map(|p| p[1].timestamp_ms - p[0].timestamp_ms)
        .collect();
    gaps.sort_unstable();
    let mid = gaps.len() / 2;
    Some(if gaps.len() % 2 == 1 {
        gaps[mid]
    } else {
        (gaps[mid - 1] + gaps[mid]) / 2
    })
}

/// Samples of `series` with `t0 <= timestamp <= t1`, always a contiguous
/// subsequence. Errors when `t0 >= t1`.
pub fn window(series: &MetricSeries, t0: i64, t1: i64) -> Result<&[Sample]> {
    if t0 >= t1 {
        return Err(Error::invalid(
            "window",
            format!("t0 ({t0}) must be < t1 ({t1})"),
        ));
    }
    let samples = series.samples();
    let lo = samples.partition_point(|s| s.timestamp_ms < t0);
    let hi = samples.partition_point(|s| s.timestamp_ms <= t1);
    Ok(&samples[lo..hi])
}

/// Load both trace files into a bundle.
pub fn load_bundle(event_path: &Path, metrics_path: &Path) -> Result<TraceBundle> {
    let events = std::fs::File::open(event_path).map_err(|e| {
        Error::parse(event_path.display().to_string(), format!("cannot open: {e}"))
    })?;
    let tasks = parse_event_log(events)?;
    if tasks.is_empty() {
        return Err(Error::EmptyInput(format!(
            "event log {} contains no tasks",
            event_path.display()
        )));
    }
    let metrics_file = std::fs::File::open(metrics_path).map_err(|e| {
        Error::parse(
            metrics_path.display().to_string(),
            format!("cannot open: {e}"),
        )
    })?;
    let metrics = parse_metrics(metrics_file)?;
    TraceBundle::new(tasks, metrics)
}

/// Write tasks as JSON-lines, stage by stage in stored order.
pub fn write_event_log<W: Write>(bundle: &TraceBundle, mut out: W) -> Result<()> {
    for task in bundle.tasks() {
        let line = serde_json::to_string(&task.to_init())
            .map_err(|e| Error::Internal(format!("event serialization failed: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Write the metrics index as CSV, series by series in key order.
pub fn write_metrics<W: Write>(metrics: &MetricsIndex, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["timestamp_ms", "node_id", "kind", "value"])
        .map_err(|e| Error::Internal(format!("metrics serialization failed: {e}")))?;
    for ((node_id, kind), series) in metrics {
        for s in series.samples() {
            writer
                .write_record([
                    s.timestamp_ms.to_string(),
                    node_id.clone(),
                    kind.as_str().to_string(),
                    s.value.to_string(),
                ])
                .map_err(|e| Error::Internal(format!("metrics serialization failed: {e}")))?;
        }
    }
    writer
        .flush()
        .map_err(|e| Error::Internal(format!("metrics flush failed: {e}")))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ScheduleRow {
    node_id: String,
    kind: String,
    start_ms: i64,
    end_ms: i64,
    magnitude: f64,
}

/// Parse a ground-truth schedule CSV.
pub fn parse_schedule<R: Read>(input: R) -> Result<GroundTruthSchedule> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut entries = Vec::new();
    for (idx, row) in reader.deserialize::<ScheduleRow>().enumerate() {
        let row_no = idx + 2;
        let row =
            row.map_err(|e| Error::parse(format!("schedule row {row_no}"), e.to_string()))?;
        let kind = MetricKind::parse(&row.kind)
            .map_err(|e| Error::parse(format!("schedule row {row_no}"), e.to_string()))?;
        entries.push(ScheduleEntry {
            node_id: row.node_id,
            kind,
            start_ms: row.start_ms,
            end_ms: row.end_ms,
            magnitude: row.magnitude,
        });
    }
    GroundTruthSchedule::new(entries)
}

/// Write a ground-truth schedule as CSV.
pub fn write_schedule<W: Write>(schedule: &GroundTruthSchedule, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["node_id", "kind", "start_ms", "end_ms", "magnitude"])
        .map_err(|e| Error::Internal(format!("schedule serialization failed: {e}")))?;
    for e in &schedule.entries {
        writer
            .write_record([
                e.node_id.clone(),
                e.kind.as_str().to_string(),
                e.start_ms.to_string(),
                e.end_ms.to_string(),
                e.magnitude.to_string(),
            ])
            .map_err(|e| Error::Internal(format!("schedule serialization failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Internal(format!("schedule flush failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_line_defaults() {
        let line = r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100,"locality":"PROCESS_LOCAL","jvm_gc_time":10}"#;
        let records = parse_event_log(line.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        let t = &records[0];
        assert_eq!(t.jvm_gc_time(), 10);
        assert_eq!(t.read_bytes(), 0);
        assert_eq!(t.shuffle_read_bytes(), 0);
        assert_eq!(t.locality(), crate::model::Locality::ProcessLocal);
    }

    #[test]
    fn event_invariant_violation_names_task() {
        let line = r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":100,"end_time":100}"#;
        let err = parse_event_log(line.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("t1"), "{err}");
    }

    #[test]
    fn event_blank_lines_skipped() {
        let text = concat!(
            r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100}"#,
            "\n\n",
            r#"{"task_id":"t2","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100}"#,
            "\n"
        );
        let records = parse_event_log(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].task_id(), "t1");
        assert_eq!(records[1].task_id(), "t2");
    }

    #[test]
    fn event_malformed_line_reports_number() {
        let text = concat!(
            r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100}"#,
            "\n",
            "{not json}\n"
        );
        let err = parse_event_log(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn event_unknown_keys_ignored() {
        let line = r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100,"attempt":3}"#;
        assert_eq!(parse_event_log(line.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn metrics_basic_series() {
        let text = "timestamp_ms,node_id,kind,value\n0,n1,cpu,0.5\n1000,n1,cpu,0.7\n";
        let metrics = parse_metrics(text.as_bytes()).unwrap();
        let series = &metrics[&("n1".to_string(), MetricKind::Cpu)];
        assert_eq!(series.samples().len(), 2);
        assert_eq!(series.nominal_period_ms(), 1000);
    }

    #[test]
    fn metrics_value_range_error_names_row() {
        let text = "timestamp_ms,node_id,kind,value\n0,n1,cpu,1.3\n";
        let err = parse_metrics(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn metrics_interleaved_nodes_ok() {
        let text = "timestamp_ms,node_id,kind,value\n\
                    0,n1,cpu,0.1\n0,n2,cpu,0.2\n1000,n1,cpu,0.3\n1000,n2,cpu,0.4\n";
        let metrics = parse_metrics(text.as_bytes()).unwrap();
        assert_eq!(metrics.len(), 2);
        assert_eq!(
            metrics[&("n1".to_string(), MetricKind::Cpu)].samples().len(),
            2
        );
    }

    #[test]
    fn metrics_out_of_order_within_series_rejected() {
        let text = "timestamp_ms,node_id,kind,value\n1000,n1,cpu,0.1\n0,n1,cpu,0.2\n";
        assert!(parse_metrics(text.as_bytes()).is_err());
    }

    fn series_0_to_3s() -> MetricSeries {
        let samples = (0..4)
            .map(|i| Sample {
                timestamp_ms: i * 1000,
                value: 0.5,
            })
            .collect();
        MetricSeries::new("n1".into(), MetricKind::Cpu, samples, 1000).unwrap()
    }

    #[test]
    fn window_closed_inclusion() {
        let series = series_0_to_3s();
        let w = window(&series, 500, 2500).unwrap();
        let ts: Vec<i64> = w.iter().map(|s| s.timestamp_ms).collect();
        assert_eq!(ts, vec![1000, 2000]);
    }

    #[test]
    fn window_beyond_series_is_empty() {
        let series = series_0_to_3s();
        assert!(window(&series, 5000, 6000).unwrap().is_empty());
    }

    #[test]
    fn window_rejects_empty_interval() {
        let series = series_0_to_3s();
        assert!(window(&series, 1000, 1000).is_err());
    }

    #[test]
    fn bundle_records_nodes_without_metrics() {
        let tasks = parse_event_log(
            concat!(
                r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100}"#,
                "\n",
                r#"{"task_id":"t2","stage_id":"s0","node_id":"n9","start_time":0,"end_time":100}"#,
                "\n"
            )
            .as_bytes(),
        )
        .unwrap();
        let metrics =
            parse_metrics("timestamp_ms,node_id,kind,value\n0,n1,cpu,0.5\n".as_bytes()).unwrap();
        let bundle = TraceBundle::new(tasks, metrics).unwrap();
        assert!(bundle.nodes_without_metrics().contains("n9"));
        assert!(!bundle.nodes_without_metrics().contains("n1"));
    }

    #[test]
    fn bundle_rejects_duplicate_task_ids() {
        let line = r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100}"#;
        let text = format!("{line}\n{line}\n");
        let tasks = parse_event_log(text.as_bytes()).unwrap();
        assert!(TraceBundle::new(tasks, MetricsIndex::new()).is_err());
    }

    #[test]
    fn bundle_rejects_empty() {
        assert!(TraceBundle::new(Vec::new(), MetricsIndex::new()).is_err());
    }

    #[test]
    fn round_trip_event_log() {
        let text = concat!(
            r#"{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":100,"locality":"ANY","read_bytes":42}"#,
            "\n",
            r#"{"task_id":"t2","stage_id":"s1","node_id":"n2","start_time":50,"end_time":300,"shuffle_read_bytes":7}"#,
            "\n"
        );
        let tasks = parse_event_log(text.as_bytes()).unwrap();
        let bundle = TraceBundle::new(tasks, MetricsIndex::new()).unwrap();
        let mut buf = Vec::new();
        write_event_log(&bundle, &mut buf).unwrap();
        let reparsed = parse_event_log(buf.as_slice()).unwrap();
        let bundle2 = TraceBundle::new(reparsed, MetricsIndex::new()).unwrap();
        assert_eq!(bundle, bundle2);
    }

    #[test]
    fn schedule_round_trip() {
        let text = "node_id,kind,start_ms,end_ms,magnitude\nn1,cpu,0,10000,0.45\nn4,network,27000,37000,40000000\n";
        let schedule = parse_schedule(text.as_bytes()).unwrap();
        assert_eq!(schedule.entries.len(), 2);
        let mut buf = Vec::new();
        write_schedule(&schedule, &mut buf).unwrap();
        let reparsed = parse_schedule(buf.as_slice()).unwrap();
        assert_eq!(schedule, reparsed);
    }
}
