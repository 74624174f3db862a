//! Property tests for the statistical invariants each module promises.

use std::collections::BTreeSet;

use proptest::prelude::*;

use bigroots::detect::{find_stragglers, peer_groups};
use bigroots::eval::{auc, confusion, rates, Labels, RocPoint};
use bigroots::features::{build_stage_vectors, cpu_feature};
use bigroots::ingest::{
    parse_event_log, parse_metrics, window, write_event_log, write_metrics, TraceBundle,
};
use bigroots::model::{
    AnalysisConfig, FeatureName, Locality, MetricKind, MetricSeries,
    MetricsIndex, Sample, TaskRecord, TaskRecordInit,
};
use bigroots::pcc::{pcc_identify, pearson, PccParams};
use bigroots::rootcause::PreparedBundle;
use bigroots::model::GroundTruthSchedule;
use bigroots::synth::{gen_trace, inject, label_tasks, CounterDists, Dist, StageSpec, TraceSpec};

fn task(id: usize, node: usize, duration: i64, read_bytes: u64) -> TaskRecord {
    TaskRecord::new(TaskRecordInit {
        task_id: format!("t{id:03}"),
        stage_id: "s0".into(),
        node_id: format!("n{node}"),
        start_time: 0,
        end_time: duration,
        locality: Locality::ProcessLocal,
        read_bytes,
        shuffle_read_bytes: 0,
        shuffle_write_bytes: 0,
        memory_bytes_spilled: 0,
        disk_bytes_spilled: 0,
        jvm_gc_time: 0,
        serialize_time: 0,
        deserialize_time: 0,
    })
    .unwrap()
}

proptest! {
    #[test]
    fn straggler_set_is_scale_invariant(
        durations in prop::collection::vec(1i64..500, 1..20),
        scale in 1i64..20,
    ) {
        let base: Vec<TaskRecord> = durations.iter().enumerate()
            .map(|(i, d)| task(i, i % 3, *d, 0)).collect();
        let scaled: Vec<TaskRecord> = durations.iter().enumerate()
            .map(|(i, d)| task(i, i % 3, *d * scale, 0)).collect();
        let ids = |tasks: &[TaskRecord]| -> Vec<String> {
            find_stragglers(tasks, 1.5).unwrap()
                .iter().map(|s| s.task.task_id().to_string()).collect()
        };
        prop_assert_eq!(ids(&base), ids(&scaled));
    }

    #[test]
    fn stragglers_never_exceed_half_the_stage(
        durations in prop::collection::vec(1i64..1000, 1..30),
        multiplier in 1.01f64..5.0,
    ) {
        let tasks: Vec<TaskRecord> = durations.iter().enumerate()
            .map(|(i, d)| task(i, 0, *d, 0)).collect();
        let found = find_stragglers(&tasks, multiplier).unwrap();
        prop_assert!(found.len() <= tasks.len() / 2);
    }

    #[test]
    fn peer_groups_partition_the_stage(
        nodes in prop::collection::vec(0usize..4, 1..20),
        subject in 0usize..20,
    ) {
        let subject = subject % nodes.len();
        let tasks: Vec<TaskRecord> = nodes.iter().enumerate()
            .map(|(i, n)| task(i, *n, 100, 0)).collect();
        let groups = peer_groups(&tasks[subject], &tasks).unwrap();
        let mut seen: BTreeSet<&String> = BTreeSet::new();
        for id in groups.intra_node.iter().chain(&groups.inter_node) {
            prop_assert!(seen.insert(id), "task listed twice: {id}");
        }
        prop_assert!(!seen.contains(&tasks[subject].task_id().to_string()));
        prop_assert_eq!(seen.len(), tasks.len() - 1);
    }

    #[test]
    fn window_returns_contiguous_subsequence(
        gaps in prop::collection::vec(1i64..3000, 1..60),
        t0 in 0i64..40_000,
        span in 1i64..40_000,
    ) {
        let mut ts = 0;
        let samples: Vec<Sample> = gaps.iter().map(|g| {
            ts += g;
            Sample { timestamp_ms: ts, value: 0.5 }
        }).collect();
        let series = MetricSeries::new("n1".into(), MetricKind::Cpu, samples.clone(), 1000).unwrap();
        let w = window(&series, t0, t0 + span).unwrap();
        // every in-range sample appears, in order, with nothing else
        let expected: Vec<Sample> = samples.iter().copied()
            .filter(|s| s.timestamp_ms >= t0 && s.timestamp_ms <= t0 + span).collect();
        prop_assert_eq!(w, expected.as_slice());
    }

    #[test]
    fn windowed_mean_matches_naive_loop(
        values in prop::collection::vec(0.0f64..1.0, 1..50),
        t0 in 0i64..30_000,
        span in 1i64..30_000,
    ) {
        let samples: Vec<Sample> = values.iter().enumerate()
            .map(|(i, v)| Sample { timestamp_ms: i as i64 * 1000, value: *v }).collect();
        let series = MetricSeries::new("n1".into(), MetricKind::Cpu, samples.clone(), 1000).unwrap();
        let got = cpu_feature(&series, t0, t0 + span).unwrap();
        let in_range: Vec<f64> = samples.iter()
            .filter(|s| s.timestamp_ms >= t0 && s.timestamp_ms <= t0 + span)
            .map(|s| s.value).collect();
        match got {
            None => prop_assert!(in_range.is_empty()),
            Some(mean) => {
                let oracle = in_range.iter().sum::<f64>() / in_range.len() as f64;
                prop_assert!((mean - oracle).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&mean), "utilization mean out of range");
            }
        }
    }

    #[test]
    fn factor_mean_over_stage_is_one(
        bytes in prop::collection::vec(0u64..1_000_000, 1..40),
    ) {
        prop_assume!(bytes.iter().sum::<u64>() > 0);
        let tasks: Vec<TaskRecord> = bytes.iter().enumerate()
            .map(|(i, b)| task(i, i % 3, 100, *b)).collect();
        let vectors = build_stage_vectors(&tasks, &MetricsIndex::new()).unwrap();
        let mut sum = 0.0;
        for t in &tasks {
            let fv = &vectors[t.task_id()];
            let factor = fv.entry(FeatureName::ReadBytes).numeric().unwrap();
            prop_assert!(factor >= 0.0);
            sum += factor;
            // time factors stay in [0,1], locality in {0,1,2}
            let gc = fv.entry(FeatureName::JvmGcTime).numeric().unwrap();
            prop_assert!((0.0..=1.0).contains(&gc));
            let loc = fv.entry(FeatureName::Locality).numeric().unwrap();
            prop_assert!([0.0, 1.0, 2.0].contains(&loc));
        }
        prop_assert!((sum / tasks.len() as f64 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn feature_vectors_ignore_stage_order(
        bytes in prop::collection::vec(0u64..1_000_000, 2..30),
        rotation in 0usize..30,
    ) {
        let tasks: Vec<TaskRecord> = bytes.iter().enumerate()
            .map(|(i, b)| task(i, i % 4, 100 + i as i64, *b)).collect();
        let mut rotated = tasks.clone();
        rotated.rotate_left(rotation % tasks.len());
        let a = build_stage_vectors(&tasks, &MetricsIndex::new()).unwrap();
        let b = build_stage_vectors(&rotated, &MetricsIndex::new()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pearson_symmetry_and_affine_invariance(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let r_xy = pearson(&xs, &ys);
        let r_yx = pearson(&ys, &xs);
        match (r_xy, r_yx) {
            (Ok(r1), Ok(r2)) => {
                prop_assert!((r1 - r2).abs() < 1e-12);
                let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                let r3 = pearson(&scaled, &ys).unwrap();
                prop_assert!((r1 - r3).abs() < 1e-9);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "symmetry broken on errors"),
        }
    }

    #[test]
    fn confusion_counts_conserve_universe(
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60),
    ) {
        let mut universe = BTreeSet::new();
        let mut predicted = BTreeSet::new();
        let mut truth = Labels::new();
        for (i, (is_pred, is_pos)) in flags.iter().enumerate() {
            let pair = (format!("t{i}"), MetricKind::Cpu);
            if *is_pred { predicted.insert(pair.clone()); }
            if *is_pos {
                truth.entry(format!("t{i}")).or_default().insert(MetricKind::Cpu);
            }
            universe.insert(pair);
        }
        let m = confusion(&predicted, &truth, &universe).unwrap();
        prop_assert_eq!(m.total() as usize, universe.len());
        let positives = truth.len() as u64;
        prop_assert_eq!(m.tp + m.fn_, positives);
    }

    #[test]
    fn rates_ignore_task_relabeling(
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40),
        salt in 1u64..1000,
    ) {
        let build = |rename: bool| {
            let mut universe = BTreeSet::new();
            let mut predicted = BTreeSet::new();
            let mut truth = Labels::new();
            for (i, (is_pred, is_pos)) in flags.iter().enumerate() {
                let id = if rename {
                    format!("renamed-{}-{i}", i as u64 * salt)
                } else {
                    format!("t{i}")
                };
                let pair = (id.clone(), MetricKind::Disk);
                if *is_pred { predicted.insert(pair.clone()); }
                if *is_pos {
                    truth.entry(id).or_default().insert(MetricKind::Disk);
                }
                universe.insert(pair);
            }
            rates(&confusion(&predicted, &truth, &universe).unwrap())
        };
        prop_assert_eq!(build(false), build(true));
    }

    #[test]
    fn auc_bounded_and_dominated_points_free(
        points in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
        extra in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let pts: Vec<RocPoint> = points.iter()
            .map(|(fpr, tpr)| RocPoint { fpr: *fpr, tpr: *tpr, thresholds: [0.0, 0.0] })
            .collect();
        let base = auc(&pts).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));

        // a point dominated by an existing one never moves the envelope
        let dominated = pts.iter().any(|p| p.fpr <= extra.0 && p.tpr >= extra.1);
        if dominated {
            let mut with_extra = pts.clone();
            with_extra.push(RocPoint { fpr: extra.0, tpr: extra.1, thresholds: [0.0, 0.0] });
            let augmented = auc(&with_extra).unwrap();
            prop_assert!((base - augmented).abs() < 1e-12);
        }
    }

    #[test]
    fn pcc_flags_shrink_as_thresholds_rise(
        seed in 0u64..200,
        ca_lo in 0.0f64..0.5,
        ca_hi_delta in 0.0f64..0.4,
        cq_lo in 0.3f64..0.6,
        cq_hi_delta in 0.0f64..0.35,
    ) {
        let spec = tiny_spec(seed);
        let bundle = gen_trace(&spec).unwrap();
        let (stage_id, tasks) = bundle.stages().next().unwrap();
        let _ = stage_id;
        let vectors = build_stage_vectors(tasks, bundle.metrics()).unwrap();
        let loose = PccParams { lambda_ca: ca_lo, lambda_cq: cq_lo };
        let tight = PccParams { lambda_ca: ca_lo + ca_hi_delta, lambda_cq: cq_lo + cq_hi_delta };
        let flagged_loose = pcc_identify(tasks, &vectors, FeatureName::ReadBytes, &loose, 1.5).unwrap();
        let flagged_tight = pcc_identify(tasks, &vectors, FeatureName::ReadBytes, &tight, 1.5).unwrap();
        prop_assert!(flagged_tight.is_subset(&flagged_loose));
    }
}

fn tiny_spec(seed: u64) -> TraceSpec {
    TraceSpec {
        node_count: 3,
        stages: vec![StageSpec {
            task_count: 15,
            base_duration_ms: 2000,
            duration_jitter_fraction: 0.3,
            counters: CounterDists {
                read_bytes: Dist::new(1.0e6, 0.4),
                jvm_gc_time: Dist::new(150.0, 0.6),
                ..CounterDists::default()
            },
            locality_mix: Default::default(),
        }],
        baseline_utilization: Default::default(),
        sample_period_ms: 1000,
        padding_ms: 8000,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Raising either threshold never adds a blamed (feature, group) pair.
    #[test]
    fn cause_sets_shrink_pointwise(seed in 0u64..500) {
        let bundle = gen_trace(&tiny_spec(seed)).unwrap();
        let cfg = AnalysisConfig::default();
        let prepared = PreparedBundle::prepare(&bundle, &cfg).unwrap();
        let causes_at = |lq: f64, lp: f64| -> BTreeSet<(String, FeatureName, bigroots::model::PeerGroupKind)> {
            prepared.analyze(lq, lp).iter().flat_map(|r| {
                r.causes.iter().map(|c| (r.task_id.clone(), c.feature, c.peer_group)).collect::<Vec<_>>()
            }).collect()
        };
        let loose = causes_at(0.5, 1.0);
        for (lq, lp) in [(0.7, 1.0), (0.5, 1.5), (0.9, 2.0)] {
            let tighter = causes_at(lq, lp);
            prop_assert!(tighter.is_subset(&loose),
                "thresholds ({lq},{lp}) added causes not present at (0.5,1.0)");
        }
    }

    /// Disabling edge detection can only grow the cause sets.
    #[test]
    fn edge_detection_only_removes_resource_causes(seed in 0u64..500) {
        let clean = gen_trace(&tiny_spec(seed)).unwrap();
        let cfg_on = AnalysisConfig::default();
        let mut cfg_off = cfg_on.clone();
        cfg_off.edge_detection = false;
        let on = bigroots::rootcause::analyze_bundle(&clean, &cfg_on).unwrap();
        let off = bigroots::rootcause::analyze_bundle(&clean, &cfg_off).unwrap();
        let set = |reports: &[bigroots::model::RootCauseReport]| -> BTreeSet<(String, FeatureName)> {
            reports.iter().flat_map(|r| {
                r.causes.iter().map(|c| (r.task_id.clone(), c.feature)).collect::<Vec<_>>()
            }).collect()
        };
        let on_set = set(&on);
        let off_set = set(&off);
        prop_assert!(on_set.is_subset(&off_set));
        // non-resource causes are identical
        let non_resource = |s: &BTreeSet<(String, FeatureName)>| -> BTreeSet<(String, FeatureName)> {
            s.iter().filter(|(_, f)| f.metric_kind().is_none()).cloned().collect()
        };
        prop_assert_eq!(non_resource(&on_set), non_resource(&off_set));
    }

    /// Writing a bundle to both formats and re-parsing reproduces it.
    #[test]
    fn bundle_round_trips_through_files(seed in 0u64..500) {
        let bundle = gen_trace(&tiny_spec(seed)).unwrap();
        let mut events = Vec::new();
        write_event_log(&bundle, &mut events).unwrap();
        let mut metrics = Vec::new();
        write_metrics(bundle.metrics(), &mut metrics).unwrap();
        let reparsed = TraceBundle::new(
            parse_event_log(events.as_slice()).unwrap(),
            parse_metrics(metrics.as_slice()).unwrap(),
        ).unwrap();
        prop_assert_eq!(bundle, reparsed);
    }

    /// Injection touches only scheduled nodes and intervals.
    #[test]
    fn injection_is_local_to_the_schedule(seed in 0u64..500) {
        let bundle = gen_trace(&tiny_spec(seed)).unwrap();
        let schedule = GroundTruthSchedule::new(vec![bigroots::model::ScheduleEntry {
            node_id: "n2".into(),
            kind: MetricKind::Cpu,
            start_ms: 2000,
            end_ms: 9000,
            magnitude: 0.5,
        }]).unwrap();
        let injected = inject(&bundle, &schedule, &Default::default()).unwrap();
        for (before, after) in bundle.tasks().zip(injected.tasks()) {
            if before.node_id() != "n2" {
                prop_assert_eq!(before, after);
            }
        }
        for ((node, kind), before) in bundle.metrics() {
            let after = &injected.metrics()[&(node.clone(), *kind)];
            for (b, a) in before.samples().iter().zip(after.samples()) {
                let in_window = node == "n2"
                    && *kind == MetricKind::Cpu
                    && (2000..=9000).contains(&b.timestamp_ms);
                if !in_window {
                    prop_assert_eq!(b.value, a.value);
                }
            }
        }
        // an empty schedule labels nothing
        let labels = label_tasks(&bundle, &GroundTruthSchedule::default());
        prop_assert!(labels.is_empty());
    }

    /// The same bundle and config always produce byte-identical reports.
    #[test]
    fn analysis_is_deterministic(seed in 0u64..500) {
        let bundle = gen_trace(&tiny_spec(seed)).unwrap();
        let cfg = AnalysisConfig::default();
        let a = bigroots::rootcause::analyze_bundle(&bundle, &cfg).unwrap();
        let b = bigroots::rootcause::analyze_bundle(&bundle, &cfg).unwrap();
        let to_json = |r: &[bigroots::model::RootCauseReport]| serde_json::to_string(r).unwrap();
        prop_assert_eq!(to_json(&a), to_json(&b));
    }
}
