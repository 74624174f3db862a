//! Resource-anomaly injection and ground-truth labeling.
//!
//! Shows how a schedule entry raises a node's utilization samples, how
//! overlapping tasks get stretched by the response model, and which tasks
//! end up labeled with which anomaly kind.
//!
//! Run: cargo run --example inject_anomalies

use bigroots::model::{GroundTruthSchedule, MetricKind, ScheduleEntry};
use bigroots::synth::{gen_trace, inject, label_tasks, ResponseModel, StageSpec, TraceSpec};

fn main() -> Result<(), bigroots::Error> {
    let spec = TraceSpec {
        node_count: 2,
        stages: vec![StageSpec {
            task_count: 10,
            base_duration_ms: 3000,
            duration_jitter_fraction: 0.0,
            counters: Default::default(),
            locality_mix: Default::default(),
        }],
        baseline_utilization: Default::default(),
        sample_period_ms: 1000,
        padding_ms: 10_000,
        seed: 4,
    };
    let clean = gen_trace(&spec)?;

    let schedule = GroundTruthSchedule::new(vec![
        ScheduleEntry {
            node_id: "n1".into(),
            kind: MetricKind::Cpu,
            start_ms: 1_000,
            end_ms: 8_000,
            magnitude: 0.5,
        },
        ScheduleEntry {
            node_id: "n2".into(),
            kind: MetricKind::Network,
            start_ms: 4_000,
            end_ms: 12_000,
            magnitude: 3.0e7,
        },
    ])?;
    let response = ResponseModel::default();
    let injected = inject(&clean, &schedule, &response)?;

    println!("n1 cpu samples (before -> after):");
    let before = clean.series("n1", MetricKind::Cpu).unwrap();
    let after = injected.series("n1", MetricKind::Cpu).unwrap();
    for (b, a) in before.samples().iter().zip(after.samples()).take(10) {
        let marker = if (a.value - b.value).abs() > 1e-9 { "  <- raised" } else { "" };
        println!("  t={:>5} ms  {:.3} -> {:.3}{marker}", b.timestamp_ms, b.value, a.value);
    }

    println!("\ntask durations (before -> after, stretch by overlap):");
    for (b, a) in clean.tasks().zip(injected.tasks()) {
        let stretched = if a.duration() != b.duration() { "  <- stretched" } else { "" };
        println!(
            "  {} on {}  [{:>5}, {:>5}] {} -> {} ms{stretched}",
            b.task_id(),
            b.node_id(),
            b.start_time(),
            b.end_time(),
            b.duration(),
            a.duration(),
        );
    }

    println!("\nground-truth labels (task overlaps an anomaly on its node):");
    for (task_id, kinds) in label_tasks(&injected, &schedule) {
        let kinds: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
        println!("  {task_id}: {}", kinds.join(", "));
    }
    Ok(())
}
