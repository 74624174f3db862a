//! Per-task feature computation: windowed resource means, the locality
//! code, and the stage-relative factor features.
//!
//! Resource features are the arithmetic mean of the samples inside the
//! task's `[start, end]` window. With uniform sampling this equals the
//! per-interval utilization integral divided by the task duration; there is
//! no interpolation at the window edges. Factor features divide a task's
//! counter by the stage average of that counter, the stage average
//! including the task itself.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::window;
use crate::model::{
    FeatureEntry, FeatureName, FeatureVector, Locality, MetricKind, MetricSeries, TaskRecord,
};

/// Mean of windowed samples, `None` when the window holds no samples.
fn windowed_mean(series: &MetricSeries, t0: i64, t1: i64) -> Result<Option<f64>> {
    let samples = window(series, t0, t1)?;
    if samples.is_empty() {
        return Ok(None);
    }
    let sum: f64 = samples.iter().map(|s| s.value).sum();
    Ok(Some(sum / samples.len() as f64))
}

fn resource_feature(
    series: &MetricSeries,
    expected: MetricKind,
    t0: i64,
    t1: i64,
) -> Result<Option<f64>> {
    if series.kind() != expected {
        return Err(Error::invalid(
            "resource feature",
            format!("expected a {expected} series, got {}", series.kind()),
        ));
    }
    windowed_mean(series, t0, t1)
}

/// Mean CPU utilization over the task window, or `None` if no samples.
pub fn cpu_feature(series: &MetricSeries, t0: i64, t1: i64) -> Result<Option<f64>> {
    resource_feature(series, MetricKind::Cpu, t0, t1)
}

/// Mean disk (I/O-busy) utilization over the task window.
pub fn disk_feature(series: &MetricSeries, t0: i64, t1: i64) -> Result<Option<f64>> {
    resource_feature(series, MetricKind::Disk, t0, t1)
}

/// Mean network throughput (bytes/s) over the task window.
pub fn network_feature(series: &MetricSeries, t0: i64, t1: i64) -> Result<Option<f64>> {
    resource_feature(series, MetricKind::Network, t0, t1)
}

/// Numeric code of a locality state: 0 in-process, 1 same node, 2 remote.
pub fn locality_feature(loc: Locality) -> u8 {
    match loc {
        Locality::ProcessLocal => 0,
        Locality::NodeLocal => 1,
        _ => 2,
    }
}

/// A byte-counter divided by its stage average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub value: f64,
    /// Zero denominator with non-zero numerator: compares greater than any
    /// finite threshold while keeping values total-ordered.
    pub degenerate_large: bool,
}

impl Factor {
    fn plain(value: f64) -> Self {
        Factor {
            value,
            degenerate_large: false,
        }
    }
}

impl From<Factor> for FeatureEntry {
    fn from(f: Factor) -> Self {
        FeatureEntry::Present {
            value: f.value,
            degenerate_large: f.degenerate_large,
        }
    }
}

/// Ratio of a task's byte counter to the stage average of that counter.
///
/// An all-zero stage (value 0, average 0) yields the neutral factor 1.0;
/// a non-zero value over a zero average yields the degenerate-large flag.
pub fn bytes_factor(value: f64, stage_avg: f64) -> Result<Factor> {
    if value < 0.0 || stage_avg < 0.0 {
        return Err(Error::invalid(
            "bytes factor",
            format!("inputs must be non-negative, got value={value}, avg={stage_avg}"),
        ));
    }
    if stage_avg == 0.0 {
        if value == 0.0 {
            return Ok(Factor::plain(1.0));
        }
        return Ok(Factor {
            value,
            degenerate_large: true,
        });
    }
    Ok(Factor::plain(value / stage_avg))
}

/// Fraction of the task duration spent in a blocking activity.
pub fn time_factor(t_ms: u64, task_duration_ms: i64) -> Result<f64> {
    if task_duration_ms <= 0 {
        return Err(Error::invalid(
            "time factor",
            format!("task duration must be positive, got {task_duration_ms}"),
        ));
    }
    if t_ms as i64 > task_duration_ms {
        return Err(Error::invalid(
            "time factor",
            format!("time ({t_ms} ms) exceeds task duration ({task_duration_ms} ms)"),
        ));
    }
    Ok(t_ms as f64 / task_duration_ms as f64)
}

/// The three metric series of one node, any of which may be absent.
#[derive(Debug, Clone, Copy, Default)]
pub struct NodeSeries<'a> {
    pub cpu: Option<&'a MetricSeries>,
    pub disk: Option<&'a MetricSeries>,
    pub network: Option<&'a MetricSeries>,
}

impl<'a> NodeSeries<'a> {
    /// Pull a node's series out of a metrics index.
    pub fn from_index(metrics: &'a crate::model::MetricsIndex, node_id: &str) -> Self {
        NodeSeries {
            cpu: metrics.get(&(node_id.to_string(), MetricKind::Cpu)),
            disk: metrics.get(&(node_id.to_string(), MetricKind::Disk)),
            network: metrics.get(&(node_id.to_string(), MetricKind::Network)),
        }
    }

    pub fn get(&self, kind: MetricKind) -> Option<&'a MetricSeries> {
        match kind {
            MetricKind::Cpu => self.cpu,
            MetricKind::Disk => self.disk,
            MetricKind::Network => self.network,
        }
    }
}

/// Per-stage mean of each byte counter, including the subject task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageAverages {
    pub read_bytes: f64,
    pub shuffle_read_bytes: f64,
    pub shuffle_write_bytes: f64,
    pub memory_bytes_spilled: f64,
    pub disk_bytes_spilled: f64,
}

impl StageAverages {
    pub fn compute(stage_tasks: &[TaskRecord]) -> Result<Self> {
        if stage_tasks.is_empty() {
            return Err(Error::EmptyInput("stage has no tasks".into()));
        }
        let n = stage_tasks.len() as f64;
        let sum = |f: fn(&TaskRecord) -> u64| stage_tasks.iter().map(|t| f(t) as f64).sum::<f64>();
        Ok(StageAverages {
            read_bytes: sum(TaskRecord::read_bytes) / n,
            shuffle_read_bytes: sum(TaskRecord::shuffle_read_bytes) / n,
            shuffle_write_bytes: sum(TaskRecord::shuffle_write_bytes) / n,
            memory_bytes_spilled: sum(TaskRecord::memory_bytes_spilled) / n,
            disk_bytes_spilled: sum(TaskRecord::disk_bytes_spilled) / n,
        })
    }

    fn get(&self, name: FeatureName) -> f64 {
        match name {
            FeatureName::ReadBytes => self.read_bytes,
            FeatureName::ShuffleReadBytes => self.shuffle_read_bytes,
            FeatureName::ShuffleWriteBytes => self.shuffle_write_bytes,
            FeatureName::MemoryBytesSpilled => self.memory_bytes_spilled,
            FeatureName::DiskBytesSpilled => self.disk_bytes_spilled,
            _ => unreachable!("not a byte-factor feature"),
        }
    }
}

const BYTE_FEATURES: [FeatureName; 5] = [
    FeatureName::ReadBytes,
    FeatureName::ShuffleReadBytes,
    FeatureName::ShuffleWriteBytes,
    FeatureName::MemoryBytesSpilled,
    FeatureName::DiskBytesSpilled,
];

const TIME_FEATURES: [FeatureName; 3] = [
    FeatureName::JvmGcTime,
    FeatureName::SerializeTime,
    FeatureName::DeserializeTime,
];

fn vector_with_averages(
    task: &TaskRecord,
    averages: &StageAverages,
    series: NodeSeries<'_>,
) -> Result<FeatureVector> {
    let mut entries = BTreeMap::new();
    entries.insert(
        FeatureName::Locality,
        FeatureEntry::value(locality_feature(task.locality()) as f64),
    );
    for kind in MetricKind::ALL {
        let entry = match series.get(kind) {
            Some(s) => match resource_feature(s, kind, task.start_time(), task.end_time())? {
                Some(value) => FeatureEntry::value(value),
                None => FeatureEntry::Missing,
            },
            None => FeatureEntry::Missing,
        };
        entries.insert(kind.feature(), entry);
    }
    for name in BYTE_FEATURES {
        let value = task.counter(name).expect("byte feature has a counter") as f64;
        let factor = bytes_factor(value, averages.get(name))?;
        entries.insert(name, factor.into());
    }
    for name in TIME_FEATURES {
        let t = task.counter(name).expect("time feature has a counter");
        entries.insert(
            name,
            FeatureEntry::value(time_factor(t, task.duration())?),
        );
    }
    FeatureVector::new(task.task_id().to_string(), entries)
}

/// Build the full twelve-entry feature vector for one task.
///
/// `stage_tasks` must contain the task; factor features use the stage
/// average over all of `stage_tasks`, the task itself included.
pub fn build_feature_vector(
    task: &TaskRecord,
    stage_tasks: &[TaskRecord],
    series: NodeSeries<'_>,
) -> Result<FeatureVector> {
    if !stage_tasks.iter().any(|t| t.task_id() == task.task_id()) {
        return Err(Error::invalid(
            "feature vector",
            format!("task {} is not part of the given stage", task.task_id()),
        ));
    }
    let averages = StageAverages::compute(stage_tasks)?;
    vector_with_averages(task, &averages, series)
}

/// Feature vectors for a whole stage, keyed by task id.
///
/// Stage averages are computed once and shared, so this is the path to use
/// for anything bigger than a single lookup.
pub fn build_stage_vectors(
    stage_tasks: &[TaskRecord],
    metrics: &crate::model::MetricsIndex,
) -> Result<BTreeMap<String, FeatureVector>> {
    let averages = StageAverages::compute(stage_tasks)?;
    let mut vectors = BTreeMap::new();
    let mut node_cache: BTreeMap<&str, NodeSeries<'_>> = BTreeMap::new();
    for task in stage_tasks {
        let series = *node_cache
            .entry(task.node_id())
            .or_insert_with(|| NodeSeries::from_index(metrics, task.node_id()));
        let fv = vector_with_averages(task, &averages, series)?;
        vectors.insert(task.task_id().to_string(), fv);
    }
    Ok(vectors)
}
