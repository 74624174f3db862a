//! Head-to-head scoring of the rule-based analysis against the
//! correlation baseline on an anomaly-injected trace.
//!
//! Both methods predict (task, resource-kind) pairs for the same straggler
//! set; the confusion matrix counts those pairs against the injection
//! ground truth.
//!
//! Run: cargo run --example evaluate_methods

use std::collections::BTreeMap;

use bigroots::eval::{confusion, rates, straggler_universe};
use bigroots::model::{AnalysisConfig, GroundTruthSchedule, MetricKind, ScheduleEntry};
use bigroots::pcc::{pcc_resource_predictions, PccParams};
use bigroots::rootcause::{resource_predictions, PreparedBundle};
use bigroots::synth::{gen_trace, inject, label_tasks, CounterDists, Dist, ResponseModel, StageSpec, TraceSpec};

fn main() -> Result<(), bigroots::Error> {
    let spec = TraceSpec {
        node_count: 5,
        stages: (0..3)
            .map(|_| StageSpec {
                task_count: 50,
                base_duration_ms: 3000,
                duration_jitter_fraction: 0.15,
                counters: CounterDists {
                    read_bytes: Dist::new(3.2e7, 0.3),
                    shuffle_read_bytes: Dist::new(1.6e7, 0.4),
                    jvm_gc_time: Dist::new(180.0, 0.5),
                    ..CounterDists::default()
                },
                locality_mix: Default::default(),
            })
            .collect(),
        baseline_utilization: Default::default(),
        sample_period_ms: 1000,
        padding_ms: 10_000,
        seed: 23,
    };
    let schedule = GroundTruthSchedule::new(vec![
        ScheduleEntry { node_id: "n1".into(), kind: MetricKind::Cpu, start_ms: 5_000, end_ms: 17_000, magnitude: 0.4 },
        ScheduleEntry { node_id: "n3".into(), kind: MetricKind::Disk, start_ms: 40_000, end_ms: 52_000, magnitude: 0.5 },
        ScheduleEntry { node_id: "n5".into(), kind: MetricKind::Cpu, start_ms: 70_000, end_ms: 82_000, magnitude: 0.4 },
    ])?;
    let bundle = inject(&gen_trace(&spec)?, &schedule, &ResponseModel::default())?;
    let labels = label_tasks(&bundle, &schedule);

    let cfg = AnalysisConfig::default();
    let prepared = PreparedBundle::prepare(&bundle, &cfg)?;
    let universe = straggler_universe(&prepared);
    println!(
        "{} stragglers -> {} (task, kind) pairs to judge, {} labeled positive\n",
        universe.len() / 3,
        universe.len(),
        universe
            .iter()
            .filter(|(t, k)| labels.get(t).is_some_and(|ks| ks.contains(k)))
            .count()
    );

    let rule_predictions = {
        let reports = prepared.analyze(cfg.quantile_lambda_q, cfg.peer_lambda_p);
        resource_predictions(&reports)
    };
    let pcc_predictions = {
        let mut vectors_by_stage = BTreeMap::new();
        for prep in prepared.stages() {
            vectors_by_stage.insert(prep.stage_id().to_string(), prep.vectors().clone());
        }
        pcc_resource_predictions(&bundle, &vectors_by_stage, &PccParams::default(), cfg.straggler_multiplier)?
    };

    for (name, predictions) in [("rule-based", &rule_predictions), ("pcc baseline", &pcc_predictions)] {
        let m = confusion(predictions, &labels, &universe)?;
        let r = rates(&m);
        println!("{name}:");
        println!("  tp={} tn={} fp={} fn={}", m.tp, m.tn, m.fp, m.fn_);
        println!(
            "  fpr={}  tpr={}  acc={}",
            fmt_pct(r.fpr),
            fmt_pct(r.tpr),
            fmt_pct(r.acc)
        );
    }
    Ok(())
}

fn fmt_pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "undefined".into(),
    }
}
