//! Seeded synthetic trace generation and resource-anomaly injection.
//!
//! Generation is fully deterministic for a fixed spec and seed. Stages run
//! back to back; within a stage each node executes its assigned tasks
//! sequentially, so the trace has the wave structure of a real parallel
//! job. Injection raises the affected node's metric samples over the
//! scheduled intervals and stretches the duration of overlapping tasks by
//! a per-resource response factor, which makes the ground truth exact
//! without running real hog processes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TraceBundle;
use crate::model::{
    GroundTruthSchedule, Locality, MetricKind, MetricSeries, MetricsIndex, Sample, TaskId,
    TaskRecord, TaskRecordInit,
};

/// Mean with a relative jitter: draws are normal with standard deviation
/// `jitter * mean`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dist {
    pub mean: f64,
    #[serde(default)]
    pub jitter: f64,
}

impl Dist {
    pub fn new(mean: f64, jitter: f64) -> Self {
        Dist { mean, jitter }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.jitter == 0.0 || self.mean == 0.0 {
            return self.mean;
        }
        let normal = Normal::new(self.mean, self.jitter * self.mean)
            .expect("validated jitter yields a finite deviation");
        normal.sample(rng)
    }
}

/// Locality state probabilities for generated tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalityMix {
    pub process_local: f64,
    pub node_local: f64,
    pub rack_local: f64,
    pub any: f64,
    pub nopref: f64,
}

impl Default for LocalityMix {
    fn default() -> Self {
        LocalityMix {
            process_local: 1.0,
            node_local: 0.0,
            rack_local: 0.0,
            any: 0.0,
            nopref: 0.0,
        }
    }
}

impl LocalityMix {
    fn sum(&self) -> f64 {
        self.process_local + self.node_local + self.rack_local + self.any + self.nopref
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Locality {
        let u: f64 = rng.random::<f64>() * self.sum();
        let mut acc = self.process_local;
        if u < acc {
            return Locality::ProcessLocal;
        }
        acc += self.node_local;
        if u < acc {
            return Locality::NodeLocal;
        }
        acc += self.rack_local;
        if u < acc {
            return Locality::RackLocal;
        }
        acc += self.any;
        if u < acc {
            return Locality::Any;
        }
        Locality::NoPref
    }
}

/// Per-task counter distributions, one per framework counter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterDists {
    pub read_bytes: Dist,
    pub shuffle_read_bytes: Dist,
    pub shuffle_write_bytes: Dist,
    pub memory_bytes_spilled: Dist,
    pub disk_bytes_spilled: Dist,
    pub jvm_gc_time: Dist,
    pub serialize_time: Dist,
    pub deserialize_time: Dist,
}

/// One stage of the generated job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub task_count: usize,
    pub base_duration_ms: i64,
    /// Relative standard deviation of task durations.
    #[serde(default)]
    pub duration_jitter_fraction: f64,
    #[serde(default)]
    pub counters: CounterDists,
    #[serde(default)]
    pub locality_mix: LocalityMix,
}

/// Per-resource baseline utilization of every node.
///
/// `node_spread` models heterogeneous hardware: each (node, kind) baseline
/// mean is scaled once by a factor drawn uniformly from
/// `[1 - node_spread, 1 + node_spread]`, so nodes idle at different levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineUtilization {
    pub cpu: Dist,
    pub disk: Dist,
    pub network: Dist,
    pub node_spread: f64,
}

impl Default for BaselineUtilization {
    fn default() -> Self {
        BaselineUtilization {
            cpu: Dist::new(0.25, 0.15),
            disk: Dist::new(0.2, 0.15),
            network: Dist::new(1.0e6, 0.2),
            node_spread: 0.0,
        }
    }
}

/// Full description of a synthetic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub node_count: usize,
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub baseline_utilization: BaselineUtilization,
    #[serde(default = "default_sample_period")]
    pub sample_period_ms: i64,
    /// Metric coverage past the last task end, so edge context exists.
    #[serde(default = "default_padding")]
    pub padding_ms: i64,
    pub seed: u64,
}

fn default_sample_period() -> i64 {
    1000
}

fn default_padding() -> i64 {
    10_000
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 1 {
            return Err(Error::invalid("trace spec", "node_count must be >= 1"));
        }
        if self.stages.is_empty() {
            return Err(Error::invalid("trace spec", "at least one stage required"));
        }
        if self.sample_period_ms < 1 {
            return Err(Error::invalid("trace spec", "sample_period_ms must be >= 1"));
        }
        if self.padding_ms < 0 {
            return Err(Error::invalid("trace spec", "padding_ms must be >= 0"));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.task_count < 1 {
                return Err(Error::invalid(
                    "trace spec",
                    format!("stage {i}: task_count must be >= 1"),
                ));
            }
            if stage.base_duration_ms < 1 {
                return Err(Error::invalid(
                    "trace spec",
                    format!("stage {i}: base_duration_ms must be >= 1"),
                ));
            }
            if stage.duration_jitter_fraction < 0.0 {
                return Err(Error::invalid(
                    "trace spec",
                    format!("stage {i}: duration jitter must be >= 0"),
                ));
            }
            let mix_sum = stage.locality_mix.sum();
            if (mix_sum - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(
                    "trace spec",
                    format!("stage {i}: locality mix sums to {mix_sum}, expected 1"),
                ));
            }
        }
        for (name, dist) in [
            ("cpu", self.baseline_utilization.cpu),
            ("disk", self.baseline_utilization.disk),
            ("network", self.baseline_utilization.network),
        ] {
            if dist.jitter < 0.0 || dist.mean < 0.0 {
                return Err(Error::invalid(
                    "trace spec",
                    format!("baseline {name}: mean and jitter must be >= 0"),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.baseline_utilization.node_spread) {
            return Err(Error::invalid(
                "trace spec",
                format!(
                    "baseline node_spread must be in [0,1), got {}",
                    self.baseline_utilization.node_spread
                ),
            ));
        }
        for (name, mean) in [
            ("cpu", self.baseline_utilization.cpu.mean),
            ("disk", self.baseline_utilization.disk.mean),
        ] {
            if mean > 1.0 {
                return Err(Error::invalid(
                    "trace spec",
                    format!("baseline {name}: mean utilization {mean} outside [0,1]"),
                ));
            }
        }
        Ok(())
    }

    pub fn node_ids(&self) -> Vec<String> {
        (1..=self.node_count).map(|i| format!("n{i}")).collect()
    }
}

fn draw_counter(dist: Dist, rng: &mut ChaCha8Rng) -> u64 {
    dist.sample(rng).max(0.0).round() as u64
}

/// Generate a deterministic trace bundle from a spec.
pub fn gen_trace(spec: &TraceSpec) -> Result<TraceBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nodes = spec.node_ids();
    let mut tasks = Vec::new();
    let mut stage_start = 0i64;
    let mut max_end = 0i64;

    for (stage_idx, stage) in spec.stages.iter().enumerate() {
        let stage_id = format!("s{stage_idx:02}");
        let mut node_cursor: Vec<i64> = vec![stage_start; nodes.len()];
        for task_idx in 0..stage.task_count {
            // round-robin placement with an occasional random hop
            let node = if rng.random::<f64>() < 0.2 {
                rng.random_range(0..nodes.len())
            } else {
                task_idx % nodes.len()
            };
            let drawn = Dist::new(
                stage.base_duration_ms as f64,
                stage.duration_jitter_fraction,
            )
            .sample(&mut rng);
            // clamp the normal draw to a small positive floor
            let duration = (drawn.max(0.05 * stage.base_duration_ms as f64).round() as i64).max(1);
            let gap = rng.random_range(0..=(stage.base_duration_ms / 20).max(1));
            let start = node_cursor[node] + gap;
            let end = start + duration;
            node_cursor[node] = end;
            max_end = max_end.max(end);

            let gc = draw_counter(stage.counters.jvm_gc_time, &mut rng).min(duration as u64);
            let ser = draw_counter(stage.counters.serialize_time, &mut rng).min(duration as u64);
            let deser =
                draw_counter(stage.counters.deserialize_time, &mut rng).min(duration as u64);
            let init = TaskRecordInit {
                task_id: format!("{stage_id}-t{task_idx:04}"),
                stage_id: stage_id.clone(),
                node_id: nodes[node].clone(),
                start_time: start,
                end_time: end,
                locality: stage.locality_mix.draw(&mut rng),
                read_bytes: draw_counter(stage.counters.read_bytes, &mut rng),
                shuffle_read_bytes: draw_counter(stage.counters.shuffle_read_bytes, &mut rng),
                shuffle_write_bytes: draw_counter(stage.counters.shuffle_write_bytes, &mut rng),
                memory_bytes_spilled: draw_counter(stage.counters.memory_bytes_spilled, &mut rng),
                disk_bytes_spilled: draw_counter(stage.counters.disk_bytes_spilled, &mut rng),
                jvm_gc_time: gc,
                serialize_time: ser,
                deserialize_time: deser,
            };
            tasks.push(TaskRecord::new(init)?);
        }
        stage_start = max_end;
    }

    let horizon = max_end + spec.padding_ms;
    let mut metrics = MetricsIndex::new();
    for node in &nodes {
        for kind in MetricKind::ALL {
            let mut dist = match kind {
                MetricKind::Cpu => spec.baseline_utilization.cpu,
                MetricKind::Disk => spec.baseline_utilization.disk,
                MetricKind::Network => spec.baseline_utilization.network,
            };
            // fixed per-(node, kind) hardware factor
            let spread = spec.baseline_utilization.node_spread;
            if spread > 0.0 {
                dist.mean *= 1.0 + spread * rng.random_range(-1.0..=1.0);
            }
            let mut samples = Vec::new();
            let mut t = 0i64;
            while t <= horizon {
                let raw = dist.sample(&mut rng);
                let value = match kind {
                    MetricKind::Cpu | MetricKind::Disk => raw.clamp(0.0, 1.0),
                    MetricKind::Network => raw.max(0.0),
                };
                samples.push(Sample {
                    timestamp_ms: t,
                    value,
                });
                t += spec.sample_period_ms;
            }
            metrics.insert(
                (node.clone(), kind),
                MetricSeries::new(node.clone(), kind, samples, spec.sample_period_ms)?,
            );
        }
    }

    TraceBundle::new(tasks, metrics)
}

/// How strongly contention of each resource kind slows an overlapping task:
/// the overlapped portion of the task is multiplied by the factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseModel {
    pub cpu_factor: f64,
    pub disk_factor: f64,
    pub network_factor: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        ResponseModel {
            cpu_factor: 1.5,
            disk_factor: 2.0,
            network_factor: 1.05,
        }
    }
}

impl ResponseModel {
    pub fn factor(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Cpu => self.cpu_factor,
            MetricKind::Disk => self.disk_factor,
            MetricKind::Network => self.network_factor,
        }
    }

    // negated comparison so NaN factors fail validation too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("cpu_factor", self.cpu_factor),
            ("disk_factor", self.disk_factor),
            ("network_factor", self.network_factor),
        ] {
            if !(f >= 1.0) {
                return Err(Error::invalid(
                    "response model",
                    format!("{name} must be >= 1, got {f}"),
                ));
            }
        }
        Ok(())
    }
}

/// Milliseconds of overlap between `[a0, a1]` and `[b0, b1]`.
fn overlap_ms(a0: i64, a1: i64, b0: i64, b1: i64) -> i64 {
    (a1.min(b1) - a0.max(b0)).max(0)
}

/// Add `delta` to every sample of `series` with timestamp in
/// `[start_ms, end_ms]`, clamping cpu/disk to `[0,1]` and network to `>= 0`.
pub fn raise_over_window(
    series: &MetricSeries,
    start_ms: i64,
    end_ms: i64,
    delta: f64,
) -> Result<MetricSeries> {
    let values = series
        .samples()
        .iter()
        .map(|s| {
            if s.timestamp_ms >= start_ms && s.timestamp_ms <= end_ms {
                match series.kind() {
                    MetricKind::Cpu | MetricKind::Disk => (s.value + delta).clamp(0.0, 1.0),
                    MetricKind::Network => (s.value + delta).max(0.0),
                }
            } else {
                s.value
            }
        })
        .collect();
    series.with_values(values)
}

/// Apply a schedule of resource anomalies to a bundle.
///
/// Metric samples inside each interval are raised by the entry magnitude.
/// Tasks on the affected node whose original window overlaps an interval
/// are stretched: the task end moves by `(factor - 1) * overlap` per entry,
/// overlaps measured against the pre-injection window so entry order never
/// matters. Subsequent tasks on the node are not re-scheduled.
pub fn inject(
    bundle: &TraceBundle,
    schedule: &GroundTruthSchedule,
    response: &ResponseModel,
) -> Result<TraceBundle> {
    response.validate()?;
    let horizon = bundle
        .metrics_horizon_ms()
        .ok_or_else(|| Error::invalid("inject", "bundle has no metric series"))?;
    let epoch = bundle.epoch_ms();
    for (i, e) in schedule.entries.iter().enumerate() {
        if e.start_ms < epoch || e.end_ms > horizon {
            return Err(Error::invalid(
                "inject",
                format!(
                    "schedule entry {i} ({}/{} [{}, {}]) outside trace horizon [{epoch}, {horizon}]",
                    e.node_id, e.kind, e.start_ms, e.end_ms
                ),
            ));
        }
    }

    let mut metrics = bundle.metrics().clone();
    for e in &schedule.entries {
        let key = (e.node_id.clone(), e.kind);
        if let Some(series) = metrics.get(&key) {
            let raised = raise_over_window(series, e.start_ms, e.end_ms, e.magnitude)?;
            metrics.insert(key, raised);
        }
    }

    let mut tasks = Vec::new();
    for task in bundle.tasks() {
        let mut extra = 0.0;
        for e in &schedule.entries {
            if e.node_id != task.node_id() {
                continue;
            }
            let ov = overlap_ms(task.start_time(), task.end_time(), e.start_ms, e.end_ms);
            if ov > 0 {
                extra += (response.factor(e.kind) - 1.0) * ov as f64;
            }
        }
        if extra > 0.0 {
            let mut init = task.to_init();
            init.end_time += extra.round() as i64;
            tasks.push(TaskRecord::new(init)?);
        } else {
            tasks.push(task.clone());
        }
    }

    TraceBundle::new(tasks, metrics)
}

/// Ground-truth labels: a task is labeled with kind `k` when its window has
/// positive-length overlap with a `k` entry on its own node. Tasks with no
/// labels are absent from the map.
pub fn label_tasks(
    bundle: &TraceBundle,
    schedule: &GroundTruthSchedule,
) -> BTreeMap<TaskId, BTreeSet<MetricKind>> {
    let mut labels: BTreeMap<TaskId, BTreeSet<MetricKind>> = BTreeMap::new();
    for task in bundle.tasks() {
        for e in &schedule.entries {
            if e.node_id == task.node_id()
                && overlap_ms(task.start_time(), task.end_time(), e.start_ms, e.end_ms) > 0
            {
                labels
                    .entry(task.task_id().to_string())
                    .or_default()
                    .insert(e.kind);
            }
        }
    }
    labels
}

/// Per-task stretch bookkeeping: milliseconds of injected slowdown per
/// resource kind, computed exactly like [`inject`] does.
pub fn injected_stretch(
    bundle: &TraceBundle,
    schedule: &GroundTruthSchedule,
    response: &ResponseModel,
) -> BTreeMap<TaskId, BTreeMap<MetricKind, f64>> {
    let mut stretch: BTreeMap<TaskId, BTreeMap<MetricKind, f64>> = BTreeMap::new();
    for task in bundle.tasks() {
        for e in &schedule.entries {
            if e.node_id != task.node_id() {
                continue;
            }
            let ov = overlap_ms(task.start_time(), task.end_time(), e.start_ms, e.end_ms);
            if ov > 0 {
                *stretch
                    .entry(task.task_id().to_string())
                    .or_default()
                    .entry(e.kind)
                    .or_default() += (response.factor(e.kind) - 1.0) * ov as f64;
            }
        }
    }
    stretch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScheduleEntry;

    fn small_spec(seed: u64) -> TraceSpec {
        TraceSpec {
            node_count: 3,
            stages: vec![StageSpec {
                task_count: 12,
                base_duration_ms: 2000,
                duration_jitter_fraction: 0.1,
                counters: CounterDists {
                    read_bytes: Dist::new(1.0e6, 0.3),
                    jvm_gc_time: Dist::new(100.0, 0.5),
                    ..CounterDists::default()
                },
                locality_mix: LocalityMix {
                    process_local: 0.7,
                    node_local: 0.2,
                    rack_local: 0.05,
                    any: 0.04,
                    nopref: 0.01,
                },
            }],
            baseline_utilization: BaselineUtilization::default(),
            sample_period_ms: 1000,
            padding_ms: 10_000,
            seed,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_trace(&small_spec(7)).unwrap();
        let b = gen_trace(&small_spec(7)).unwrap();
        assert_eq!(a, b);
        let c = gen_trace(&small_spec(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_jitter_gives_constant_durations() {
        let mut spec = small_spec(3);
        spec.stages[0].duration_jitter_fraction = 0.0;
        let bundle = gen_trace(&spec).unwrap();
        for task in bundle.tasks() {
            assert_eq!(task.duration(), 2000);
        }
    }

    #[test]
    fn metrics_cover_tasks_with_padding() {
        let bundle = gen_trace(&small_spec(5)).unwrap();
        let max_end = bundle.tasks().map(|t| t.end_time()).max().unwrap();
        assert!(bundle.metrics_horizon_ms().unwrap() >= max_end + 9000);
    }

    fn schedule_on(node: &str, kind: MetricKind, start: i64, end: i64) -> GroundTruthSchedule {
        GroundTruthSchedule::new(vec![ScheduleEntry {
            node_id: node.into(),
            kind,
            start_ms: start,
            end_ms: end,
            magnitude: 0.4,
        }])
        .unwrap()
    }

    #[test]
    fn inject_raises_and_clamps() {
        let bundle = gen_trace(&small_spec(11)).unwrap();
        let schedule = schedule_on("n1", MetricKind::Cpu, 0, 5000);
        let injected = inject(&bundle, &schedule, &ResponseModel::default()).unwrap();
        let before = bundle.series("n1", MetricKind::Cpu).unwrap();
        let after = injected.series("n1", MetricKind::Cpu).unwrap();
        for (b, a) in before.samples().iter().zip(after.samples()) {
            if b.timestamp_ms <= 5000 {
                let expected = (b.value + 0.4).clamp(0.0, 1.0);
                assert!((a.value - expected).abs() < 1e-12);
            } else {
                assert_eq!(a.value, b.value);
            }
        }
        // other nodes untouched
        assert_eq!(
            bundle.series("n2", MetricKind::Cpu),
            injected.series("n2", MetricKind::Cpu)
        );
    }

    #[test]
    fn inject_stretches_covered_tasks() {
        let mut spec = small_spec(13);
        spec.stages[0].duration_jitter_fraction = 0.0;
        let bundle = gen_trace(&spec).unwrap();
        // cover the entire trace on n1 with a disk anomaly
        let horizon = bundle.metrics_horizon_ms().unwrap();
        let schedule = schedule_on("n1", MetricKind::Disk, 0, horizon);
        let injected = inject(&bundle, &schedule, &ResponseModel::default()).unwrap();
        for (before, after) in bundle.tasks().zip(injected.tasks()) {
            if before.node_id() == "n1" {
                assert_eq!(after.duration(), 2 * before.duration(), "disk factor 2.0");
            } else {
                assert_eq!(after.duration(), before.duration());
            }
        }
    }

    #[test]
    fn inject_interval_outside_horizon_rejected() {
        let bundle = gen_trace(&small_spec(17)).unwrap();
        let horizon = bundle.metrics_horizon_ms().unwrap();
        let schedule = schedule_on("n1", MetricKind::Cpu, 0, horizon + 1);
        assert!(inject(&bundle, &schedule, &ResponseModel::default()).is_err());
    }

    #[test]
    fn labels_follow_overlap_and_node() {
        let bundle = gen_trace(&small_spec(19)).unwrap();
        let task = bundle.tasks().find(|t| t.node_id() == "n1").unwrap();
        let schedule = schedule_on("n1", MetricKind::Cpu, task.start_time(), task.end_time());
        let labels = label_tasks(&bundle, &schedule);
        assert!(labels[task.task_id()].contains(&MetricKind::Cpu));

        let elsewhere = schedule_on("n2", MetricKind::Cpu, task.start_time(), task.end_time());
        let labels = label_tasks(&bundle, &elsewhere);
        assert!(!labels.contains_key(task.task_id()) || task.node_id() == "n2");
    }

    #[test]
    fn empty_schedule_labels_nothing() {
        let bundle = gen_trace(&small_spec(23)).unwrap();
        let labels = label_tasks(&bundle, &GroundTruthSchedule::default());
        assert!(labels.is_empty());
    }

    #[test]
    fn multi_kind_overlap_labels_union() {
        let bundle = gen_trace(&small_spec(29)).unwrap();
        let task = bundle.tasks().find(|t| t.node_id() == "n2").unwrap();
        let schedule = GroundTruthSchedule::new(vec![
            ScheduleEntry {
                node_id: "n2".into(),
                kind: MetricKind::Cpu,
                start_ms: task.start_time(),
                end_ms: task.end_time(),
                magnitude: 0.3,
            },
            ScheduleEntry {
                node_id: "n2".into(),
                kind: MetricKind::Disk,
                start_ms: task.start_time(),
                end_ms: task.end_time(),
                magnitude: 0.3,
            },
        ])
        .unwrap();
        let labels = label_tasks(&bundle, &schedule);
        assert_eq!(labels[task.task_id()].len(), 2);
    }

    #[test]
    fn every_node_hosts_tasks_at_scale() {
        // placement property over many seeds
        for seed in 0..100 {
            let mut spec = small_spec(seed);
            spec.node_count = 5;
            spec.stages[0].task_count = 50;
            let bundle = gen_trace(&spec).unwrap();
            let mut nodes = BTreeSet::new();
            for t in bundle.tasks() {
                nodes.insert(t.node_id().to_string());
            }
            assert_eq!(nodes.len(), 5, "seed {seed} left a node empty");
        }
    }
}
