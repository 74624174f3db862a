//! The edge filter: separating utilization a task caused from utilization
//! it suffered.
//!
//! A resource feature is discarded when utilization rises at task start
//! and falls back at task end (the task generated the load itself). When
//! the surrounding level stays comparable, the contention is external and
//! the feature remains a root-cause candidate.
//!
//! Run: cargo run --example edge_detection

use bigroots::model::{AnalysisConfig, MetricKind, MetricSeries, Sample};
use bigroots::rootcause::edge_filter;
use bigroots::synth::raise_over_window;

fn flat_series(len_ms: i64, value: f64) -> MetricSeries {
    let samples = (0..len_ms / 1000)
        .map(|s| Sample {
            timestamp_ms: s * 1000,
            value,
        })
        .collect();
    MetricSeries::new("n1".into(), MetricKind::Cpu, samples, 1000).unwrap()
}

fn main() -> Result<(), bigroots::Error> {
    let cfg = AnalysisConfig::default();
    let (t0, t1) = (20_000, 30_000);

    // external contention: the node is busy before, during, and after
    let busy = flat_series(60_000, 0.85);
    println!(
        "busy before/during/after  -> {:?}",
        edge_filter(&busy, t0, t1, &cfg)?
    );

    // self-caused: utilization tracks the task boundaries exactly
    let self_caused = raise_over_window(&flat_series(60_000, 0.1), t0, t1, 0.75)?;
    println!(
        "rises at start, falls at end -> {:?}",
        edge_filter(&self_caused, t0, t1, &cfg)?
    );

    // anomaly wider than the task: context stays hot, feature kept
    let wider = raise_over_window(&flat_series(60_000, 0.1), t0 - 8000, t1 + 8000, 0.75)?;
    println!(
        "anomaly wider than task   -> {:?}",
        edge_filter(&wider, t0, t1, &cfg)?
    );

    // a task at the very start of the trace has no head context
    println!(
        "task at trace start       -> {:?}",
        edge_filter(&busy, 0, 10_000, &cfg)?
    );

    // sensitivity: a higher filter threshold discards more aggressively
    let mut strict = cfg.clone();
    strict.edge_lambda_e = 1.0;
    let shallow = raise_over_window(&flat_series(60_000, 0.4), t0, t1, 0.3)?;
    println!(
        "\nshallow bump, lambda_e=0.5 -> {:?}",
        edge_filter(&shallow, t0, t1, &cfg)?
    );
    println!(
        "shallow bump, lambda_e=1.0 -> {:?}",
        edge_filter(&shallow, t0, t1, &strict)?
    );
    Ok(())
}
