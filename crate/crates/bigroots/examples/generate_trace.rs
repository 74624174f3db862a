//! Generate a trace bundle on disk: events.jsonl, metrics.csv, truth.csv.
//!
//! The same files come out of `bigroots gen-trace`; this shows the library
//! path and the on-disk formats.
//!
//! Run: cargo run --example generate_trace

use std::fs;

use bigroots::ingest::{load_bundle, write_event_log, write_metrics, write_schedule};
use bigroots::model::{GroundTruthSchedule, MetricKind, ScheduleEntry};
use bigroots::synth::{gen_trace, inject, CounterDists, Dist, ResponseModel, StageSpec, TraceSpec};

fn main() -> Result<(), bigroots::Error> {
    let spec = TraceSpec {
        node_count: 3,
        stages: vec![StageSpec {
            task_count: 18,
            base_duration_ms: 2000,
            duration_jitter_fraction: 0.1,
            counters: CounterDists {
                read_bytes: Dist::new(1e7, 0.25),
                ..CounterDists::default()
            },
            locality_mix: Default::default(),
        }],
        baseline_utilization: Default::default(),
        sample_period_ms: 1000,
        padding_ms: 8000,
        seed: 99,
    };
    let schedule = GroundTruthSchedule::new(vec![ScheduleEntry {
        node_id: "n1".into(),
        kind: MetricKind::Disk,
        start_ms: 2_000,
        end_ms: 9_000,
        magnitude: 0.5,
    }])?;

    let bundle = inject(&gen_trace(&spec)?, &schedule, &ResponseModel::default())?;

    let out_dir = std::env::temp_dir().join("bigroots-generate-trace");
    fs::create_dir_all(&out_dir)?;
    write_event_log(&bundle, fs::File::create(out_dir.join("events.jsonl"))?)?;
    write_metrics(bundle.metrics(), fs::File::create(out_dir.join("metrics.csv"))?)?;
    write_schedule(&schedule, fs::File::create(out_dir.join("truth.csv"))?)?;

    println!("wrote {}", out_dir.display());
    for name in ["events.jsonl", "metrics.csv", "truth.csv"] {
        let len = fs::metadata(out_dir.join(name))?.len();
        println!("  {name:<14} {len:>8} bytes");
    }

    // the writers round-trip: loading the files yields the same bundle
    let reloaded = load_bundle(&out_dir.join("events.jsonl"), &out_dir.join("metrics.csv"))?;
    assert_eq!(reloaded, bundle);
    println!("reload check passed: parsed bundle equals the generated one");
    Ok(())
}
