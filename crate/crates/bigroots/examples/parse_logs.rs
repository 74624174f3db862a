//! The two trace input formats, parsed from literal strings.
//!
//! Event log: JSON-lines, one task per line. Required keys: task_id,
//! stage_id, node_id, start_time, end_time. Counters default to 0 and
//! locality to NOPREF; unknown keys are ignored; blank lines are skipped.
//!
//! Metrics log: CSV with header `timestamp_ms,node_id,kind,value`, rows
//! sorted per (node, kind) series. cpu/disk values are utilization
//! fractions in [0,1]; network values are bytes per second.
//!
//! Run: cargo run --example parse_logs

use bigroots::ingest::{parse_event_log, parse_metrics, window, TraceBundle};
use bigroots::model::MetricKind;

const EVENTS: &str = r#"
{"task_id":"t1","stage_id":"s0","node_id":"n1","start_time":0,"end_time":4000,"locality":"PROCESS_LOCAL","read_bytes":1048576,"jvm_gc_time":120}
{"task_id":"t2","stage_id":"s0","node_id":"n2","start_time":500,"end_time":3800,"locality":"NODE_LOCAL","read_bytes":900000}
{"task_id":"t3","stage_id":"s0","node_id":"n1","start_time":4100,"end_time":16000,"locality":"ANY","read_bytes":4194304,"shuffle_read_bytes":65536}
"#;

const METRICS: &str = "\
timestamp_ms,node_id,kind,value
0,n1,cpu,0.32
1000,n1,cpu,0.35
2000,n1,cpu,0.31
3000,n1,cpu,0.90
4000,n1,cpu,0.92
0,n1,network,1200000
1000,n1,network,1150000
0,n2,cpu,0.28
1000,n2,cpu,0.30
";

fn main() -> Result<(), bigroots::Error> {
    let tasks = parse_event_log(EVENTS.as_bytes())?;
    println!("parsed {} tasks:", tasks.len());
    for t in &tasks {
        println!(
            "  {} stage={} node={} duration={} ms locality={} read_bytes={}",
            t.task_id(),
            t.stage_id(),
            t.node_id(),
            t.duration(),
            t.locality(),
            t.read_bytes()
        );
    }

    let metrics = parse_metrics(METRICS.as_bytes())?;
    println!("\nparsed {} metric series:", metrics.len());
    for ((node, kind), series) in &metrics {
        println!(
            "  {node}/{kind}: {} samples, nominal period {} ms",
            series.samples().len(),
            series.nominal_period_ms()
        );
    }

    // time-window lookup over a series (closed on both ends)
    let n1_cpu = &metrics[&("n1".to_string(), MetricKind::Cpu)];
    let in_window = window(n1_cpu, 1000, 3000)?;
    println!("\nn1/cpu samples in [1000, 3000]:");
    for s in in_window {
        println!("  t={} value={}", s.timestamp_ms, s.value);
    }

    let bundle = TraceBundle::new(tasks, metrics)?;
    println!(
        "\nbundle: {} tasks, {} series, nodes without metrics: {:?}",
        bundle.task_count(),
        bundle.metrics().len(),
        bundle.nodes_without_metrics()
    );
    Ok(())
}
