//! ROC sweep over the two thresholds of each method, with the area under
//! the upper envelope as the summary score.
//!
//! Run: cargo run --example threshold_sweep

use bigroots::eval::{auc, roc_sweep, Method, SweepGrid};
use bigroots::model::{AnalysisConfig, GroundTruthSchedule, MetricKind, ScheduleEntry};
use bigroots::synth::{gen_trace, inject, label_tasks, ResponseModel, StageSpec, TraceSpec};

fn main() -> Result<(), bigroots::Error> {
    let spec = TraceSpec {
        node_count: 5,
        stages: (0..3)
            .map(|_| StageSpec {
                task_count: 50,
                base_duration_ms: 3000,
                duration_jitter_fraction: 0.15,
                counters: Default::default(),
                locality_mix: Default::default(),
            })
            .collect(),
        baseline_utilization: Default::default(),
        sample_period_ms: 1000,
        padding_ms: 10_000,
        seed: 31,
    };
    let schedule = GroundTruthSchedule::new(
        [
            ("n1", 5_000, 15_000),
            ("n2", 22_000, 32_000),
            ("n4", 45_000, 55_000),
            ("n5", 70_000, 80_000),
        ]
        .into_iter()
        .map(|(node, start_ms, end_ms)| ScheduleEntry {
            node_id: node.into(),
            kind: MetricKind::Disk,
            start_ms,
            end_ms,
            magnitude: 0.5,
        })
        .collect(),
    )?;
    let bundle = inject(&gen_trace(&spec)?, &schedule, &ResponseModel::default())?;
    let labels = label_tasks(&bundle, &schedule);
    let cfg = AnalysisConfig::default();

    let rule_grid = SweepGrid {
        first: vec![0.5, 0.7, 0.8, 0.9, 0.95], // quantile sensitivity
        second: vec![1.0, 1.2, 1.5, 2.0, 3.0], // peer multiple
    };
    let pcc_grid = SweepGrid {
        first: vec![0.05, 0.1, 0.3, 0.5, 0.7],  // min |correlation|
        second: vec![0.5, 0.7, 0.8, 0.9, 0.95], // quantile cut
    };

    for (name, method, grid) in [
        ("rule-based", Method::Bigroots, &rule_grid),
        ("pcc baseline", Method::Pcc, &pcc_grid),
    ] {
        let points = roc_sweep(&bundle, &labels, method, grid, &cfg)?;
        println!("{name}: {} grid cells", points.len());
        for p in &points {
            println!(
                "  thresholds ({:>5.2}, {:>5.2})  fpr {:.3}  tpr {:.3}",
                p.thresholds[0], p.thresholds[1], p.fpr, p.tpr
            );
        }
        println!("  auc of the upper envelope: {:.4}\n", auc(&points)?);
    }
    Ok(())
}
