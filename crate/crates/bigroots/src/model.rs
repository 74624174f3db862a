//! Domain types shared by ingestion, analysis, and evaluation. No I/O here.
//!
//! All types are immutable value objects once constructed: constructors
//! validate every invariant and reject violations with a descriptive error,
//! so downstream code never re-checks them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TaskId = String;
pub type StageId = String;
pub type NodeId = String;

/// Index of metric series keyed by owning node and resource kind.
pub type MetricsIndex = BTreeMap<(NodeId, MetricKind), MetricSeries>;

/// Data-placement state of a task, as reported by the execution framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Locality {
    /// Data is in the current process.
    ProcessLocal,
    /// Data is on the same node.
    NodeLocal,
    /// Data is on a node in the same rack.
    RackLocal,
    /// Data is on a node outside the rack.
    Any,
    /// No placement preference (e.g. reading from a database).
    NoPref,
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Locality::ProcessLocal => "PROCESS_LOCAL",
            Locality::NodeLocal => "NODE_LOCAL",
            Locality::RackLocal => "RACK_LOCAL",
            Locality::Any => "ANY",
            Locality::NoPref => "NOPREF",
        };
        f.write_str(s)
    }
}

/// Resource kind covered by node-level utilization sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Cpu,
    Disk,
    Network,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Cpu, MetricKind::Disk, MetricKind::Network];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Cpu => "cpu",
            MetricKind::Disk => "disk",
            MetricKind::Network => "network",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cpu" => Ok(MetricKind::Cpu),
            "disk" => Ok(MetricKind::Disk),
            "network" => Ok(MetricKind::Network),
            other => Err(Error::invalid(
                "metric kind",
                format!("expected cpu|disk|network, got {other:?}"),
            )),
        }
    }

    /// The feature slot this resource kind feeds.
    pub fn feature(self) -> FeatureName {
        match self {
            MetricKind::Cpu => FeatureName::Cpu,
            MetricKind::Disk => FeatureName::Disk,
            MetricKind::Network => FeatureName::Network,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Raw field set for one task, as carried by the event log.
///
/// This is the line schema of the JSON-lines event log: the five identity
/// and timing fields are required, counters default to 0 and locality to
/// `NOPREF` when absent. Validation happens in [`TaskRecord::new`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRecordInit {
    pub task_id: TaskId,
    pub stage_id: StageId,
    pub node_id: NodeId,
    pub start_time: i64,
    pub end_time: i64,
    #[serde(default = "default_locality")]
    pub locality: Locality,
    #[serde(default)]
    pub read_bytes: u64,
    #[serde(default)]
    pub shuffle_read_bytes: u64,
    #[serde(default)]
    pub shuffle_write_bytes: u64,
    #[serde(default)]
    pub memory_bytes_spilled: u64,
    #[serde(default)]
    pub disk_bytes_spilled: u64,
    #[serde(default)]
    pub jvm_gc_time: u64,
    #[serde(default)]
    pub serialize_time: u64,
    #[serde(default)]
    pub deserialize_time: u64,
}

fn default_locality() -> Locality {
    Locality::NoPref
}

/// One task's timing, placement, locality, and framework counters.
///
/// Invariants enforced at construction:
/// - `end_time > start_time` (strictly positive duration)
/// - `jvm_gc_time`, `serialize_time`, `deserialize_time` each fit within
///   the duration
///
/// Times are integer milliseconds since the trace epoch; task timestamps and
/// metric timestamps must share that epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskRecord {
    task_id: TaskId,
    stage_id: StageId,
    node_id: NodeId,
    start_time: i64,
    end_time: i64,
    locality: Locality,
    read_bytes: u64,
    shuffle_read_bytes: u64,
    shuffle_write_bytes: u64,
    memory_bytes_spilled: u64,
    disk_bytes_spilled: u64,
    jvm_gc_time: u64,
    serialize_time: u64,
    deserialize_time: u64,
}

impl TaskRecord {
    pub fn new(init: TaskRecordInit) -> Result<Self> {
        if init.task_id.is_empty() {
            return Err(Error::invalid("task record", "task_id must be non-empty"));
        }
        if init.end_time <= init.start_time {
            return Err(Error::invalid(
                "task record",
                format!(
                    "task {}: end_time ({}) must be > start_time ({})",
                    init.task_id, init.end_time, init.start_time
                ),
            ));
        }
        let duration = (init.end_time - init.start_time) as u64;
        for (field, value) in [
            ("jvm_gc_time", init.jvm_gc_time),
            ("serialize_time", init.serialize_time),
            ("deserialize_time", init.deserialize_time),
        ] {
            if value > duration {
                return Err(Error::invalid(
                    "task record",
                    format!(
                        "task {}: {field} ({value} ms) exceeds task duration ({duration} ms)",
                        init.task_id
                    ),
                ));
            }
        }
        Ok(TaskRecord {
            task_id: init.task_id,
            stage_id: init.stage_id,
            node_id: init.node_id,
            start_time: init.start_time,
            end_time: init.end_time,
            locality: init.locality,
            read_bytes: init.read_bytes,
            shuffle_read_bytes: init.shuffle_read_bytes,
            shuffle_write_bytes: init.shuffle_write_bytes,
            memory_bytes_spilled: init.memory_bytes_spilled,
            disk_bytes_spilled: init.disk_bytes_spilled,
            jvm_gc_time: init.jvm_gc_time,
            serialize_time: init.serialize_time,
            deserialize_time: init.deserialize_time,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }
    pub fn stage_id(&self) -> &str {
        &self.stage_id
    }
    pub fn node_id(&self) -> &str {
        &self.node_id
    }
    pub fn start_time(&self) -> i64 {
        self.start_time
    }
    pub fn end_time(&self) -> i64 {
        self.end_time
    }
    pub fn locality(&self) -> Locality {
        self.locality
    }
    pub fn read_bytes(&self) -> u64 {
        self.read_bytes
    }
    pub fn shuffle_read_bytes(&self) -> u64 {
        self.shuffle_read_bytes
    }
    pub fn shuffle_write_bytes(&self) -> u64 {
        self.shuffle_write_bytes
    }
    pub fn memory_bytes_spilled(&self) -> u64 {
        self.memory_bytes_spilled
    }
    pub fn disk_bytes_spilled(&self) -> u64 {
        self.disk_bytes_spilled
    }
    pub fn jvm_gc_time(&self) -> u64 {
        self.jvm_gc_time
    }
    pub fn serialize_time(&self) -> u64 {
        self.serialize_time
    }
    pub fn deserialize_time(&self) -> u64 {
        self.deserialize_time
    }

    /// Task duration in milliseconds (always positive).
    pub fn duration(&self) -> i64 {
        self.end_time - self.start_time
    }

    /// Raw value of the counter backing a numeric or time feature.
    pub fn counter(&self, feature: FeatureName) -> Option<u64> {
        match feature {
            FeatureName::ReadBytes => Some(self.read_bytes),
            FeatureName::ShuffleReadBytes => Some(self.shuffle_read_bytes),
            FeatureName::ShuffleWriteBytes => Some(self.shuffle_write_bytes),
            FeatureName::MemoryBytesSpilled => Some(self.memory_bytes_spilled),
            FeatureName::DiskBytesSpilled => Some(self.disk_bytes_spilled),
            FeatureName::JvmGcTime => Some(self.jvm_gc_time),
            FeatureName::SerializeTime => Some(self.serialize_time),
            FeatureName::DeserializeTime => Some(self.deserialize_time),
            _ => None,
        }
    }

    /// Rebuild the raw field set (for serialization and trace rewriting).
    pub fn to_init(&self) -> TaskRecordInit {
        TaskRecordInit {
            task_id: self.task_id.clone(),
            stage_id: self.stage_id.clone(),
            node_id: self.node_id.clone(),
            start_time: self.start_time,
            end_time: self.end_time,
            locality: self.locality,
            read_bytes: self.read_bytes,
            shuffle_read_bytes: self.shuffle_read_bytes,
            shuffle_write_bytes: self.shuffle_write_bytes,
            memory_bytes_spilled: self.memory_bytes_spilled,
            disk_bytes_spilled: self.disk_bytes_spilled,
            jvm_gc_time: self.jvm_gc_time,
            serialize_time: self.serialize_time,
            deserialize_time: self.deserialize_time,
        }
    }
}

/// One utilization sample: pre-aggregated value for one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp_ms: i64,
    pub value: f64,
}

/// Per-node, per-resource sampled utilization time series.
///
/// Sample values are pre-aggregated per interval: CPU holds the mean user
/// fraction across cores, disk the I/O-busy fraction (both in `[0,1]`),
/// network the bytes sent+received per second (non-negative). Timestamps
/// are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSeries {
    node_id: NodeId,
    kind: MetricKind,
    samples: Vec<Sample>,
    nominal_period_ms: i64,
}

pub const DEFAULT_SAMPLE_PERIOD_MS: i64 = 1000;

impl MetricSeries {
    pub fn new(
        node_id: NodeId,
        kind: MetricKind,
        samples: Vec<Sample>,
        nominal_period_ms: i64,
    ) -> Result<Self> {
        if nominal_period_ms <= 0 {
            return Err(Error::invalid(
                "metric series",
                format!("nominal period must be positive, got {nominal_period_ms}"),
            ));
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(Error::invalid(
                    "metric series",
                    format!(
                        "{node_id}/{kind}: timestamps must be strictly increasing ({} then {})",
                        pair[0].timestamp_ms, pair[1].timestamp_ms
                    ),
                ));
            }
        }
        for s in &samples {
            validate_sample_value(&node_id, kind, s.timestamp_ms, s.value)?;
        }
        Ok(MetricSeries {
            node_id,
            kind,
            samples,
            nominal_period_ms,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }
    pub fn kind(&self) -> MetricKind {
        self.kind
    }
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
    pub fn nominal_period_ms(&self) -> i64 {
        self.nominal_period_ms
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Replace sample values, keeping timestamps; used by anomaly injection.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.samples.len() {
            return Err(Error::Internal(format!(
                "value count {} does not match sample count {}",
                values.len(),
                self.samples.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(values)
            .map(|(s, value)| Sample {
                timestamp_ms: s.timestamp_ms,
                value,
            })
            .collect();
        MetricSeries::new(
            self.node_id.clone(),
            self.kind,
            samples,
            self.nominal_period_ms,
        )
    }
}

pub fn validate_sample_value(node_id: &str, kind: MetricKind, ts: i64, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(
            "metric sample",
            format!("{node_id}/{kind} at {ts}: value must be finite"),
        ));
    }
    match kind {
        MetricKind::Cpu | MetricKind::Disk => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(
                    "metric sample",
                    format!("{node_id}/{kind} at {ts}: utilization {value} outside [0,1]"),
                ));
            }
        }
        MetricKind::Network => {
            if value < 0.0 {
                return Err(Error::invalid(
                    "metric sample",
                    format!("{node_id}/{kind} at {ts}: throughput {value} is negative"),
                ));
            }
        }
    }
    Ok(())
}

/// Category a feature belongs to; each category has its own blame rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    Discrete,
    Numeric,
    Resource,
    Time,
}

impl FeatureCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Discrete => "discrete",
            FeatureCategory::Numeric => "numeric",
            FeatureCategory::Resource => "resource",
            FeatureCategory::Time => "time",
        }
    }
}

/// The twelve per-task features considered by the analysis.
///
/// Declaration order is the canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Locality,
    Cpu,
    Disk,
    Network,
    ReadBytes,
    ShuffleReadBytes,
    ShuffleWriteBytes,
    MemoryBytesSpilled,
    DiskBytesSpilled,
    JvmGcTime,
    SerializeTime,
    DeserializeTime,
}

impl FeatureName {
    pub const ALL: [FeatureName; 12] = [
        FeatureName::Locality,
        FeatureName::Cpu,
        FeatureName::Disk,
        FeatureName::Network,
        FeatureName::ReadBytes,
        FeatureName::ShuffleReadBytes,
        FeatureName::ShuffleWriteBytes,
        FeatureName::MemoryBytesSpilled,
        FeatureName::DiskBytesSpilled,
        FeatureName::JvmGcTime,
        FeatureName::SerializeTime,
        FeatureName::DeserializeTime,
    ];

    pub fn category(self) -> FeatureCategory {
        match self {
            FeatureName::Locality => FeatureCategory::Discrete,
            FeatureName::Cpu | FeatureName::Disk | FeatureName::Network => {
                FeatureCategory::Resource
            }
            FeatureName::ReadBytes
            | FeatureName::ShuffleReadBytes
            | FeatureName::ShuffleWriteBytes
            | FeatureName::MemoryBytesSpilled
            | FeatureName::DiskBytesSpilled => FeatureCategory::Numeric,
            FeatureName::JvmGcTime | FeatureName::SerializeTime | FeatureName::DeserializeTime => {
                FeatureCategory::Time
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureName::Locality => "locality",
            FeatureName::Cpu => "cpu",
            FeatureName::Disk => "disk",
            FeatureName::Network => "network",
            FeatureName::ReadBytes => "read_bytes",
            FeatureName::ShuffleReadBytes => "shuffle_read_bytes",
            FeatureName::ShuffleWriteBytes => "shuffle_write_bytes",
            FeatureName::MemoryBytesSpilled => "memory_bytes_spilled",
            FeatureName::DiskBytesSpilled => "disk_bytes_spilled",
            FeatureName::JvmGcTime => "jvm_gc_time",
            FeatureName::SerializeTime => "serialize_time",
            FeatureName::DeserializeTime => "deserialize_time",
        }
    }

    /// The resource kind behind a resource feature, if any.
    pub fn metric_kind(self) -> Option<MetricKind> {
        match self {
            FeatureName::Cpu => Some(MetricKind::Cpu),
            FeatureName::Disk => Some(MetricKind::Disk),
            FeatureName::Network => Some(MetricKind::Network),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single feature slot: either a value or an explicit missing marker.
///
/// Resource features are missing when no metric samples overlap the task
/// window; missing features are never root-cause candidates. The
/// `degenerate_large` flag marks a ratio with a zero denominator but a
/// non-zero numerator, which compares greater than any finite threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum FeatureEntry {
    Present { value: f64, degenerate_large: bool },
    Missing,
}

impl FeatureEntry {
    pub fn value(value: f64) -> Self {
        FeatureEntry::Present {
            value,
            degenerate_large: false,
        }
    }

    pub fn as_present(self) -> Option<(f64, bool)> {
        match self {
            FeatureEntry::Present {
                value,
                degenerate_large,
            } => Some((value, degenerate_large)),
            FeatureEntry::Missing => None,
        }
    }

    pub fn numeric(self) -> Option<f64> {
        self.as_present().map(|(v, _)| v)
    }

    pub fn is_missing(self) -> bool {
        matches!(self, FeatureEntry::Missing)
    }
}

/// Named feature values for one task.
///
/// Always carries all twelve feature slots; only resource slots may be
/// missing. The locality value is one of {0, 1, 2}.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    task_id: TaskId,
    entries: BTreeMap<FeatureName, FeatureEntry>,
}

impl FeatureVector {
    pub fn new(task_id: TaskId, entries: BTreeMap<FeatureName, FeatureEntry>) -> Result<Self> {
        for name in FeatureName::ALL {
            match entries.get(&name) {
                None => {
                    return Err(Error::invalid(
                        "feature vector",
                        format!("task {task_id}: missing slot for feature {name}"),
                    ))
                }
                Some(FeatureEntry::Missing) => {
                    if name.category() != FeatureCategory::Resource {
                        return Err(Error::invalid(
                            "feature vector",
                            format!("task {task_id}: only resource features may be missing, {name} is not"),
                        ));
                    }
                }
                Some(FeatureEntry::Present { value, .. }) => {
                    if !value.is_finite() {
                        return Err(Error::invalid(
                            "feature vector",
                            format!("task {task_id}: feature {name} must be finite"),
                        ));
                    }
                    if name == FeatureName::Locality && ![0.0, 1.0, 2.0].contains(value) {
                        return Err(Error::invalid(
                            "feature vector",
                            format!("task {task_id}: locality value {value} not in {{0,1,2}}"),
                        ));
                    }
                }
            }
        }
        if entries.len() != FeatureName::ALL.len() {
            return Err(Error::invalid(
                "feature vector",
                format!(
                    "task {task_id}: expected {} entries, got {}",
                    FeatureName::ALL.len(),
                    entries.len()
                ),
            ));
        }
        Ok(FeatureVector { task_id, entries })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn entry(&self, name: FeatureName) -> FeatureEntry {
        // Constructor guarantees every slot exists.
        self.entries[&name]
    }

    pub fn entries(&self) -> impl Iterator<Item = (FeatureName, FeatureEntry)> + '_ {
        self.entries.iter().map(|(n, e)| (*n, *e))
    }

    /// Count of present (non-missing) features.
    pub fn present_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| !e.is_missing())
            .count()
    }
}

/// Aggregation used when comparing a straggler's feature to its peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeerAggregator {
    Mean,
    Median,
}

/// Tunable thresholds of the analysis.
///
/// `straggler_multiplier` scales the stage median to set the straggler cut;
/// `quantile_lambda_q` and `peer_lambda_p` gate numeric deviations;
/// `time_lower_bound` discards insignificant blocking-time factors;
/// `edge_lambda_e` and `edge_width_ms` drive the self-caused-utilization
/// filter. `exempt_nopref_locality` optionally keeps tasks with no
/// placement preference out of locality blame (off by default: no-pref
/// still counts as remote access).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub straggler_multiplier: f64,
    pub quantile_lambda_q: f64,
    pub peer_lambda_p: f64,
    pub time_lower_bound: f64,
    pub edge_lambda_e: f64,
    pub edge_width_ms: i64,
    pub peer_aggregator: PeerAggregator,
    pub edge_detection: bool,
    pub exempt_nopref_locality: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            straggler_multiplier: 1.5,
            quantile_lambda_q: 0.9,
            peer_lambda_p: 1.5,
            time_lower_bound: 0.2,
            edge_lambda_e: 0.5,
            edge_width_ms: 5000,
            peer_aggregator: PeerAggregator::Mean,
            edge_detection: true,
            exempt_nopref_locality: false,
        }
    }
}

impl AnalysisConfig {
    // negated comparisons so NaN values fail validation too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.straggler_multiplier > 1.0) {
            return Err(Error::invalid(
                "analysis config",
                format!(
                    "straggler_multiplier must be > 1, got {}",
                    self.straggler_multiplier
                ),
            ));
        }
        if !(self.quantile_lambda_q > 0.0 && self.quantile_lambda_q < 1.0) {
            return Err(Error::invalid(
                "analysis config",
                format!(
                    "quantile_lambda_q must be in (0,1), got {}",
                    self.quantile_lambda_q
                ),
            ));
        }
        if !(self.peer_lambda_p > 0.0) {
            return Err(Error::invalid(
                "analysis config",
                format!("peer_lambda_p must be > 0, got {}", self.peer_lambda_p),
            ));
        }
        if !(0.0..=1.0).contains(&self.time_lower_bound) {
            return Err(Error::invalid(
                "analysis config",
                format!(
                    "time_lower_bound must be in [0,1], got {}",
                    self.time_lower_bound
                ),
            ));
        }
        if !(self.edge_lambda_e > 0.0 && self.edge_lambda_e <= 1.0) {
            return Err(Error::invalid(
                "analysis config",
                format!("edge_lambda_e must be in (0,1], got {}", self.edge_lambda_e),
            ));
        }
        if self.edge_width_ms <= 0 {
            return Err(Error::invalid(
                "analysis config",
                format!("edge_width_ms must be positive, got {}", self.edge_width_ms),
            ));
        }
        Ok(())
    }
}

/// Comparison set a flagged feature was judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerGroupKind {
    IntraNode,
    InterNode,
    Global,
}

impl PeerGroupKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PeerGroupKind::IntraNode => "intra_node",
            PeerGroupKind::InterNode => "inter_node",
            PeerGroupKind::Global => "global",
        }
    }
}

/// Identification rule that flagged a cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    NumericDeviation,
    TimeDeviation,
    ResourceDeviation,
    LocalityMajority,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::NumericDeviation => "numeric_deviation",
            RuleId::TimeDeviation => "time_deviation",
            RuleId::ResourceDeviation => "resource_deviation",
            RuleId::LocalityMajority => "locality_majority",
        }
    }
}

/// Why a candidate feature was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FilterReason {
    EdgeSelfCaused,
    BelowTimeBound,
    BelowQuantile,
    BelowPeerThreshold,
    LocalityMajorityRemote,
}

/// A feature blamed for a straggler, with the evidence that flagged it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cause {
    pub feature: FeatureName,
    pub category: FeatureCategory,
    pub value: f64,
    pub peer_group: PeerGroupKind,
    pub evidence: RuleId,
}

/// A candidate feature rejected by a filter rule, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredCandidate {
    pub feature: FeatureName,
    pub peer_group: PeerGroupKind,
    pub reason: FilterReason,
}

/// Per-straggler verdict: how much it straggles, what is blamed, and what
/// was considered but rejected.
///
/// `causes` and `filtered` are disjoint per (feature, peer group); every
/// evaluated (feature, peer group) pair lands in exactly one of the two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootCauseReport {
    pub task_id: TaskId,
    /// Task duration divided by the stage median duration.
    pub straggler_scale: f64,
    pub causes: Vec<Cause>,
    pub filtered: Vec<FilteredCandidate>,
}

/// One injected anomaly interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub node_id: NodeId,
    pub kind: MetricKind,
    pub start_ms: i64,
    pub end_ms: i64,
    /// Utilization delta for cpu/disk, bytes-per-second delta for network.
    pub magnitude: f64,
}

/// Injected anomaly intervals used as evaluation ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl GroundTruthSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.start_ms >= e.end_ms {
                return Err(Error::invalid(
                    "ground truth schedule",
                    format!(
                        "entry {i} ({}/{}): start ({}) must be < end ({})",
                        e.node_id, e.kind, e.start_ms, e.end_ms
                    ),
                ));
            }
            if !e.magnitude.is_finite() {
                return Err(Error::invalid(
                    "ground truth schedule",
                    format!("entry {i} ({}/{}): magnitude must be finite", e.node_id, e.kind),
                ));
            }
        }
        Ok(GroundTruthSchedule { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Classification counts for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}
