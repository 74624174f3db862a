//! Root-cause identification for stragglers.
//!
//! A straggler's feature is blamed only when it clears every rule of its
//! category:
//!
//! - every candidate must exceed the stage-wide quantile (sensitivity
//!   `quantile_lambda_q`) *and* a multiple (`peer_lambda_p`) of its peer
//!   aggregate, checked separately against intra-node and inter-node peers
//!   ("numeric rule");
//! - time features must additionally exceed a fixed lower bound, so a GC
//!   factor that is tiny in absolute terms is never blamed no matter how it
//!   compares to peers;
//! - resource features pass an edge filter: when utilization right before
//!   the task is below `edge_lambda_e` times the in-task level *and* the
//!   same holds right after it, the utilization rose with the task and fell
//!   with it, so the task itself caused it and the feature is discarded;
//! - locality is blamed only for remote-reading stragglers whose normal
//!   peers mostly read locally (their locality codes sum to less than half
//!   their count).
//!
//! Every evaluated (feature, peer group) pair lands in exactly one of
//! `causes` or `filtered`; groups with no usable peers are not evaluated.

use std::collections::{BTreeMap, BTreeSet};

use crate::detect::find_stragglers;
use crate::error::{Error, Result};
use crate::features::build_stage_vectors;
use crate::ingest::{window, TraceBundle};
use crate::model::{
    AnalysisConfig, Cause, FeatureCategory, FeatureName, FeatureVector, FilterReason,
    FilteredCandidate, Locality, MetricKind, MetricSeries, MetricsIndex, PeerAggregator,
    PeerGroupKind, RootCauseReport, RuleId, TaskId, TaskRecord,
};

/// Outcome of the numeric threshold rule for one (feature, peer group).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleVerdict {
    Triggered,
    BelowQuantile,
    BelowPeerThreshold,
    /// The peer group has no usable values; the rule cannot fire.
    NoPeers,
}

/// Outcome of the edge filter for one resource feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeVerdict {
    /// Utilization does not track the task boundaries; keep the candidate.
    External,
    /// Utilization rises at task start and falls at task end; discard.
    SelfCaused,
    /// A context window holds no samples; kept conservatively.
    InsufficientContext,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn global_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile of no values".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(
            "quantile",
            format!("q must be in (0,1), got {q}"),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
    Ok(quantile_sorted(&sorted, q))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy)]
struct PeerStats {
    mean: f64,
    median: f64,
}

fn peer_stats(values: &[f64]) -> Option<PeerStats> {
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
    Some(PeerStats {
        mean,
        median: median_sorted(&sorted).expect("non-empty"),
    })
}

fn median_sorted(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// Median of a sorted slice with one occurrence of `excluded` removed.
/// `excluded` must be present in the slice.
fn median_excluding(sorted: &[f64], excluded: f64) -> Option<f64> {
    let remaining = sorted.len() - 1;
    if remaining == 0 {
        return None;
    }
    let idx = sorted.partition_point(|v| *v < excluded);
    debug_assert!(sorted[idx] == excluded, "excluded value must be present");
    let get = |k: usize| {
        if k < idx {
            sorted[k]
        } else {
            sorted[k + 1]
        }
    };
    Some(if remaining % 2 == 1 {
        get(remaining / 2)
    } else {
        (get(remaining / 2 - 1) + get(remaining / 2)) / 2.0
    })
}

/// Present values of one feature, aggregated per node so each straggler's
/// peer statistics come from O(log n) work instead of a fresh scan.
struct FeatureAgg {
    all_sum: f64,
    all_count: usize,
    node_sorted: BTreeMap<String, Vec<f64>>,
    node_sum: BTreeMap<String, (f64, usize)>,
    /// Sorted values on every *other* node, per straggler-hosting node.
    other_sorted: BTreeMap<String, Vec<f64>>,
}

impl FeatureAgg {
    fn intra_stats(&self, node: &str, own: Option<f64>) -> Option<PeerStats> {
        let (sum, count) = self.node_sum.get(node).copied().unwrap_or((0.0, 0));
        let (sum, count) = match own {
            Some(x) => (sum - x, count.checked_sub(1)?),
            None => (sum, count),
        };
        if count == 0 {
            return None;
        }
        let sorted = &self.node_sorted[node];
        let median = match own {
            Some(x) => median_excluding(sorted, x)?,
            None => median_sorted(sorted)?,
        };
        Some(PeerStats {
            mean: sum / count as f64,
            median,
        })
    }

    fn inter_stats(&self, node: &str) -> Option<PeerStats> {
        let (node_sum, node_count) = self.node_sum.get(node).copied().unwrap_or((0.0, 0));
        let count = self.all_count - node_count;
        if count == 0 {
            return None;
        }
        let sorted = &self.other_sorted[node];
        Some(PeerStats {
            mean: (self.all_sum - node_sum) / count as f64,
            median: median_sorted(sorted)?,
        })
    }
}

impl PeerStats {
    fn aggregate(&self, agg: PeerAggregator) -> f64 {
        match agg {
            PeerAggregator::Mean => self.mean,
            PeerAggregator::Median => self.median,
        }
    }
}

fn verdict_against(
    f: f64,
    degenerate_large: bool,
    stats: Option<PeerStats>,
    sorted_values: &[f64],
    lambda_q: f64,
    lambda_p: f64,
    aggregator: PeerAggregator,
) -> RuleVerdict {
    // negated comparisons: a non-finite value must never trigger
    #![allow(clippy::neg_cmp_op_on_partial_ord)]
    let Some(stats) = stats else {
        return RuleVerdict::NoPeers;
    };
    if degenerate_large {
        return RuleVerdict::Triggered;
    }
    if !(f > quantile_sorted(sorted_values, lambda_q)) {
        return RuleVerdict::BelowQuantile;
    }
    if !(f > stats.aggregate(aggregator) * lambda_p) {
        return RuleVerdict::BelowPeerThreshold;
    }
    RuleVerdict::Triggered
}

/// The numeric threshold rule: `f` must exceed the `lambda_q` quantile of
/// `all_values` and `lambda_p` times the peer aggregate.
pub fn numeric_rule(
    f: f64,
    peers: &[f64],
    all_values: &[f64],
    cfg: &AnalysisConfig,
) -> Result<RuleVerdict> {
    if all_values.is_empty() {
        return Err(Error::EmptyInput("numeric rule needs feature values".into()));
    }
    let mut sorted = all_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
    Ok(verdict_against(
        f,
        false,
        peer_stats(peers),
        &sorted,
        cfg.quantile_lambda_q,
        cfg.peer_lambda_p,
        cfg.peer_aggregator,
    ))
}

/// Lower bound for time factors: strictly above `bound` to count.
pub fn time_rule(f: f64, bound: f64) -> bool {
    f > bound
}

fn mean_of(samples: &[crate::model::Sample]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    Some(samples.iter().map(|s| s.value).sum::<f64>() / samples.len() as f64)
}

/// Classify in-task utilization against the context right before and right
/// after the task.
///
/// Head window is `[t0 - edge_width, t0)`, tail window is
/// `(t1, t1 + edge_width]`. The feature is self-caused when both context
/// means sit below `edge_lambda_e` times the in-task mean.
pub fn edge_filter(
    series: &MetricSeries,
    t0: i64,
    t1: i64,
    cfg: &AnalysisConfig,
) -> Result<EdgeVerdict> {
    if t0 >= t1 {
        return Err(Error::invalid(
            "edge filter",
            format!("t0 ({t0}) must be < t1 ({t1})"),
        ));
    }
    let Some(during) = mean_of(window(series, t0, t1)?) else {
        return Ok(EdgeVerdict::InsufficientContext);
    };
    let samples = series.samples();
    let head = {
        let lo = samples.partition_point(|s| s.timestamp_ms < t0 - cfg.edge_width_ms);
        let hi = samples.partition_point(|s| s.timestamp_ms < t0);
        mean_of(&samples[lo..hi])
    };
    let tail = {
        let lo = samples.partition_point(|s| s.timestamp_ms <= t1);
        let hi = samples.partition_point(|s| s.timestamp_ms <= t1 + cfg.edge_width_ms);
        mean_of(&samples[lo..hi])
    };
    let (Some(head), Some(tail)) = (head, tail) else {
        return Ok(EdgeVerdict::InsufficientContext);
    };
    let cut = cfg.edge_lambda_e * during;
    if head < cut && tail < cut {
        Ok(EdgeVerdict::SelfCaused)
    } else {
        Ok(EdgeVerdict::External)
    }
}

/// Locality blame: the straggler reads remotely (code 2) while the normal
/// tasks' locality codes sum to less than half their count. False when
/// there are no normal tasks.
pub fn locality_rule(straggler_locality: u8, normal_localities: &[u8]) -> bool {
    if straggler_locality != 2 || normal_localities.is_empty() {
        return false;
    }
    let sum: u64 = normal_localities.iter().map(|&v| v as u64).sum();
    2 * sum < normal_localities.len() as u64
}

#[derive(Debug, Clone, Copy)]
enum LocalityEvidence {
    /// Straggler does not read remotely (or is exempt): not a candidate.
    NotCandidate,
    /// No normal tasks to compare against: rule cannot fire.
    NoNormals,
    Evaluated { triggered: bool, code: u8 },
}

#[derive(Debug)]
struct StragglerCtx {
    task_idx: usize,
    scale: f64,
    peer_values: BTreeMap<(FeatureName, PeerGroupKind), Option<PeerStats>>,
    edge: BTreeMap<MetricKind, EdgeVerdict>,
    locality: LocalityEvidence,
}

/// Precomputed per-stage state: feature vectors, stragglers, sorted value
/// populations, peer aggregates, and edge verdicts.
///
/// Everything that does not depend on `quantile_lambda_q` / `peer_lambda_p`
/// is computed once here, so threshold sweeps re-evaluate only the cheap
/// comparisons.
pub struct StagePrep<'a> {
    stage_id: String,
    tasks: &'a [TaskRecord],
    cfg: AnalysisConfig,
    vectors: BTreeMap<TaskId, FeatureVector>,
    sorted_values: BTreeMap<FeatureName, Vec<f64>>,
    stragglers: Vec<StragglerCtx>,
}

const PEERED_GROUPS: [PeerGroupKind; 2] = [PeerGroupKind::IntraNode, PeerGroupKind::InterNode];

impl<'a> StagePrep<'a> {
    pub fn new(
        stage_id: &str,
        tasks: &'a [TaskRecord],
        metrics: &MetricsIndex,
        cfg: &AnalysisConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let vectors = build_stage_vectors(tasks, metrics)?;
        let mut found = find_stragglers(tasks, cfg.straggler_multiplier)?;
        found.sort_by(|a, b| a.task.task_id().cmp(b.task.task_id()));
        let straggler_ids: BTreeSet<&str> =
            found.iter().map(|s| s.task.task_id()).collect();
        let straggler_nodes: BTreeSet<&str> =
            found.iter().map(|s| s.task.node_id()).collect();
        let index_of: BTreeMap<&str, usize> = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.task_id(), i))
            .collect();
        // feature vectors aligned with task order, for single-pass scans
        let task_vectors: Vec<&FeatureVector> =
            tasks.iter().map(|t| &vectors[t.task_id()]).collect();

        let mut sorted_values: BTreeMap<FeatureName, Vec<f64>> = BTreeMap::new();
        let mut aggregates: BTreeMap<FeatureName, FeatureAgg> = BTreeMap::new();
        for name in FeatureName::ALL {
            let mut values: Vec<f64> = task_vectors
                .iter()
                .filter_map(|fv| fv.entry(name).numeric())
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
            if name.category() != FeatureCategory::Discrete {
                let mut node_sorted: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                let mut node_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
                for (task, fv) in tasks.iter().zip(&task_vectors) {
                    if let Some(v) = fv.entry(name).numeric() {
                        node_sorted
                            .entry(task.node_id().to_string())
                            .or_default()
                            .push(v);
                        let slot = node_sum.entry(task.node_id().to_string()).or_default();
                        slot.0 += v;
                        slot.1 += 1;
                    }
                }
                for sorted in node_sorted.values_mut() {
                    sorted.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
                }
                let mut other_sorted = BTreeMap::new();
                for node in &straggler_nodes {
                    let mut others: Vec<f64> = tasks
                        .iter()
                        .zip(&task_vectors)
                        .filter(|(t, _)| t.node_id() != *node)
                        .filter_map(|(_, fv)| fv.entry(name).numeric())
                        .collect();
                    others.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
                    other_sorted.insert(node.to_string(), others);
                }
                aggregates.insert(
                    name,
                    FeatureAgg {
                        all_sum: values.iter().sum(),
                        all_count: values.len(),
                        node_sorted,
                        node_sum,
                        other_sorted,
                    },
                );
            }
            sorted_values.insert(name, values);
        }

        let normal_localities: Vec<u8> = tasks
            .iter()
            .filter(|t| !straggler_ids.contains(t.task_id()))
            .map(|t| crate::features::locality_feature(t.locality()))
            .collect();

        let mut stragglers = Vec::with_capacity(found.len());
        for s in &found {
            let task = s.task;
            let task_idx = index_of[task.task_id()];

            let mut peer_values = BTreeMap::new();
            for name in FeatureName::ALL {
                if name.category() == FeatureCategory::Discrete {
                    continue;
                }
                let agg = &aggregates[&name];
                let own = vectors[task.task_id()].entry(name).numeric();
                peer_values.insert(
                    (name, PeerGroupKind::IntraNode),
                    agg.intra_stats(task.node_id(), own),
                );
                peer_values.insert(
                    (name, PeerGroupKind::InterNode),
                    agg.inter_stats(task.node_id()),
                );
            }

            let mut edge = BTreeMap::new();
            for kind in MetricKind::ALL {
                if vectors[task.task_id()].entry(kind.feature()).is_missing() {
                    continue;
                }
                if let Some(series) = metrics.get(&(task.node_id().to_string(), kind)) {
                    edge.insert(
                        kind,
                        edge_filter(series, task.start_time(), task.end_time(), cfg)?,
                    );
                }
            }

            let code = crate::features::locality_feature(task.locality());
            let exempt = cfg.exempt_nopref_locality && task.locality() == Locality::NoPref;
            let locality = if code != 2 || exempt {
                LocalityEvidence::NotCandidate
            } else if normal_localities.is_empty() {
                LocalityEvidence::NoNormals
            } else {
                LocalityEvidence::Evaluated {
                    triggered: locality_rule(code, &normal_localities),
                    code,
                }
            };

            stragglers.push(StragglerCtx {
                task_idx,
                scale: s.scale,
                peer_values,
                edge,
                locality,
            });
        }

        Ok(StagePrep {
            stage_id: stage_id.to_string(),
            tasks,
            cfg: cfg.clone(),
            vectors,
            sorted_values,
            stragglers,
        })
    }

    pub fn stage_id(&self) -> &str {
        &self.stage_id
    }

    pub fn vectors(&self) -> &BTreeMap<TaskId, FeatureVector> {
        &self.vectors
    }

    pub fn tasks(&self) -> &[TaskRecord] {
        self.tasks
    }

    pub fn straggler_ids(&self) -> Vec<&str> {
        self.stragglers
            .iter()
            .map(|s| self.tasks[s.task_idx].task_id())
            .collect()
    }

    /// Reports for every straggler of the stage at the given thresholds;
    /// all other knobs come from the config captured at preparation.
    pub fn analyze(&self, lambda_q: f64, lambda_p: f64) -> Vec<RootCauseReport> {
        self.stragglers
            .iter()
            .map(|ctx| self.analyze_ctx(ctx, lambda_q, lambda_p))
            .collect()
    }

    fn analyze_ctx(&self, ctx: &StragglerCtx, lambda_q: f64, lambda_p: f64) -> RootCauseReport {
        let task = &self.tasks[ctx.task_idx];
        let fv = &self.vectors[task.task_id()];
        let mut causes = Vec::new();
        let mut filtered = Vec::new();

        for name in FeatureName::ALL {
            match name.category() {
                FeatureCategory::Discrete => match ctx.locality {
                    LocalityEvidence::NotCandidate | LocalityEvidence::NoNormals => {}
                    LocalityEvidence::Evaluated { triggered, code } => {
                        if triggered {
                            causes.push(Cause {
                                feature: name,
                                category: FeatureCategory::Discrete,
                                value: code as f64,
                                peer_group: PeerGroupKind::Global,
                                evidence: RuleId::LocalityMajority,
                            });
                        } else {
                            filtered.push(FilteredCandidate {
                                feature: name,
                                peer_group: PeerGroupKind::Global,
                                reason: FilterReason::LocalityMajorityRemote,
                            });
                        }
                    }
                },
                category => {
                    let Some((value, degenerate_large)) = fv.entry(name).as_present() else {
                        continue; // missing resource feature: never a candidate
                    };
                    for group in PEERED_GROUPS {
                        let verdict = verdict_against(
                            value,
                            degenerate_large,
                            ctx.peer_values[&(name, group)],
                            &self.sorted_values[&name],
                            lambda_q,
                            lambda_p,
                            self.cfg.peer_aggregator,
                        );
                        match verdict {
                            RuleVerdict::NoPeers => {}
                            RuleVerdict::BelowQuantile => filtered.push(FilteredCandidate {
                                feature: name,
                                peer_group: group,
                                reason: FilterReason::BelowQuantile,
                            }),
                            RuleVerdict::BelowPeerThreshold => filtered.push(FilteredCandidate {
                                feature: name,
                                peer_group: group,
                                reason: FilterReason::BelowPeerThreshold,
                            }),
                            RuleVerdict::Triggered => {
                                self.resolve_triggered(
                                    name, category, value, group, ctx, &mut causes, &mut filtered,
                                );
                            }
                        }
                    }
                }
            }
        }

        RootCauseReport {
            task_id: task.task_id().to_string(),
            straggler_scale: ctx.scale,
            causes,
            filtered,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve_triggered(
        &self,
        name: FeatureName,
        category: FeatureCategory,
        value: f64,
        group: PeerGroupKind,
        ctx: &StragglerCtx,
        causes: &mut Vec<Cause>,
        filtered: &mut Vec<FilteredCandidate>,
    ) {
        match category {
            FeatureCategory::Numeric => causes.push(Cause {
                feature: name,
                category,
                value,
                peer_group: group,
                evidence: RuleId::NumericDeviation,
            }),
            FeatureCategory::Time => {
                if time_rule(value, self.cfg.time_lower_bound) {
                    causes.push(Cause {
                        feature: name,
                        category,
                        value,
                        peer_group: group,
                        evidence: RuleId::TimeDeviation,
                    });
                } else {
                    filtered.push(FilteredCandidate {
                        feature: name,
                        peer_group: group,
                        reason: FilterReason::BelowTimeBound,
                    });
                }
            }
            FeatureCategory::Resource => {
                let kind = name.metric_kind().expect("resource feature has a kind");
                let self_caused = self.cfg.edge_detection
                    && ctx.edge.get(&kind) == Some(&EdgeVerdict::SelfCaused);
                if self_caused {
                    filtered.push(FilteredCandidate {
                        feature: name,
                        peer_group: group,
                        reason: FilterReason::EdgeSelfCaused,
                    });
                } else {
                    causes.push(Cause {
                        feature: name,
                        category,
                        value,
                        peer_group: group,
                        evidence: RuleId::ResourceDeviation,
                    });
                }
            }
            FeatureCategory::Discrete => unreachable!("locality handled separately"),
        }
    }
}

/// A whole bundle prepared for repeated threshold evaluation.
pub struct PreparedBundle<'a> {
    preps: Vec<StagePrep<'a>>,
}

impl<'a> PreparedBundle<'a> {
    pub fn prepare(bundle: &'a TraceBundle, cfg: &AnalysisConfig) -> Result<Self> {
        let mut preps = Vec::new();
        for (stage_id, tasks) in bundle.stages() {
            preps.push(StagePrep::new(stage_id, tasks, bundle.metrics(), cfg)?);
        }
        Ok(PreparedBundle { preps })
    }

    pub fn stages(&self) -> &[StagePrep<'a>] {
        &self.preps
    }

    /// Reports for every straggler, ordered by stage id then task id.
    pub fn analyze(&self, lambda_q: f64, lambda_p: f64) -> Vec<RootCauseReport> {
        self.preps
            .iter()
            .flat_map(|p| p.analyze(lambda_q, lambda_p))
            .collect()
    }

    /// Every straggler task id, ordered by stage id then task id.
    pub fn straggler_ids(&self) -> Vec<String> {
        self.preps
            .iter()
            .flat_map(|p| p.straggler_ids().into_iter().map(str::to_string))
            .collect()
    }
}

/// Analyze one straggler. Errors if the task is not a straggler of the
/// given stage under `cfg.straggler_multiplier`.
pub fn analyze_task(
    task: &TaskRecord,
    stage_tasks: &[TaskRecord],
    metrics: &MetricsIndex,
    cfg: &AnalysisConfig,
) -> Result<RootCauseReport> {
    let prep = StagePrep::new(task.stage_id(), stage_tasks, metrics, cfg)?;
    prep.analyze(cfg.quantile_lambda_q, cfg.peer_lambda_p)
        .into_iter()
        .find(|r| r.task_id == task.task_id())
        .ok_or_else(|| {
            Error::invalid(
                "root cause analysis",
                format!(
                    "task {} is not a straggler (multiplier {})",
                    task.task_id(),
                    cfg.straggler_multiplier
                ),
            )
        })
}

/// Detect and analyze every straggler of the bundle; output is ordered by
/// stage id, then task id.
pub fn analyze_bundle(bundle: &TraceBundle, cfg: &AnalysisConfig) -> Result<Vec<RootCauseReport>> {
    let prepared = PreparedBundle::prepare(bundle, cfg)?;
    Ok(prepared.analyze(cfg.quantile_lambda_q, cfg.peer_lambda_p))
}

/// Resource kinds predicted as causes, per task, deduplicated across peer
/// groups. This is the prediction set scored against injected ground truth.
pub fn resource_predictions(reports: &[RootCauseReport]) -> BTreeSet<(TaskId, MetricKind)> {
    let mut predictions = BTreeSet::new();
    for report in reports {
        for cause in &report.causes {
            if let Some(kind) = cause.feature.metric_kind() {
                predictions.insert((report.task_id.clone(), kind));
            }
        }
    }
    predictions
}
