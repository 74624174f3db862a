//! End-to-end root-cause analysis of a synthetic trace.
//!
//! Generates a five-node trace, injects a CPU anomaly on one node, and
//! prints each straggler with the features blamed for it and the
//! candidates the filters rejected.
//!
//! Run: cargo run --example analyze_trace

use bigroots::model::{AnalysisConfig, GroundTruthSchedule, MetricKind, ScheduleEntry};
use bigroots::rootcause::analyze_bundle;
use bigroots::synth::{
    gen_trace, inject, CounterDists, Dist, LocalityMix, ResponseModel, StageSpec, TraceSpec,
};

fn main() -> Result<(), bigroots::Error> {
    let spec = TraceSpec {
        node_count: 5,
        stages: vec![
            StageSpec {
                task_count: 40,
                base_duration_ms: 3000,
                duration_jitter_fraction: 0.15,
                counters: CounterDists {
                    read_bytes: Dist::new(64e6, 0.3),
                    shuffle_read_bytes: Dist::new(8e6, 0.4),
                    jvm_gc_time: Dist::new(150.0, 0.5),
                    ..CounterDists::default()
                },
                locality_mix: LocalityMix {
                    process_local: 0.6,
                    node_local: 0.3,
                    rack_local: 0.1,
                    any: 0.0,
                    nopref: 0.0,
                },
            },
            StageSpec {
                task_count: 40,
                base_duration_ms: 2500,
                duration_jitter_fraction: 0.15,
                counters: CounterDists {
                    shuffle_read_bytes: Dist::new(24e6, 0.5),
                    shuffle_write_bytes: Dist::new(12e6, 0.5),
                    jvm_gc_time: Dist::new(200.0, 0.5),
                    ..CounterDists::default()
                },
                locality_mix: LocalityMix::default(),
            },
        ],
        seed: 17,
        ..demo_defaults()
    };

    let clean = gen_trace(&spec)?;
    let schedule = GroundTruthSchedule::new(vec![ScheduleEntry {
        node_id: "n2".into(),
        kind: MetricKind::Cpu,
        start_ms: 5_000,
        end_ms: 20_000,
        magnitude: 0.45,
    }])?;
    let bundle = inject(&clean, &schedule, &ResponseModel::default())?;

    let cfg = AnalysisConfig::default();
    let reports = analyze_bundle(&bundle, &cfg)?;

    println!(
        "analyzed {} tasks in {} stages; {} stragglers detected\n",
        bundle.task_count(),
        bundle.stages().count(),
        reports.len()
    );
    for report in &reports {
        let task = bundle
            .tasks()
            .find(|t| t.task_id() == report.task_id)
            .expect("report refers to a bundle task");
        println!(
            "straggler {} on {} ({} ms, {:.2}x the stage median)",
            report.task_id,
            task.node_id(),
            task.duration(),
            report.straggler_scale
        );
        if report.causes.is_empty() {
            println!("  no root cause identified");
        }
        for cause in &report.causes {
            println!(
                "  cause: {:<20} value {:>12.4}  vs {} peers  [{}]",
                cause.feature.to_string(),
                cause.value,
                cause.peer_group.as_str(),
                cause.evidence.as_str()
            );
        }
        for f in &report.filtered {
            println!(
                "  rejected: {:<17} {} ({:?})",
                f.feature.to_string(),
                f.peer_group.as_str(),
                f.reason
            );
        }
        println!();
    }
    Ok(())
}

fn demo_defaults() -> TraceSpec {
    TraceSpec {
        node_count: 1,
        stages: vec![],
        baseline_utilization: Default::default(),
        sample_period_ms: 1000,
        padding_ms: 10_000,
        seed: 0,
    }
}
