//! Correlation baseline: a feature is blamed for a stage's stragglers when
//! it correlates with task duration strongly enough and the straggler's
//! value sits above a stage quantile.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::detect::find_stragglers;
use crate::error::{Error, Result};
use crate::ingest::TraceBundle;
use crate::model::{FeatureName, FeatureVector, MetricKind, TaskId, TaskRecord};
use crate::rootcause::global_quantile;

/// Sample Pearson correlation. Errors on mismatched or short input and on
/// zero variance (treated by callers as "rule cannot fire").
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(
            "pearson",
            format!("length mismatch: {} vs {}", xs.len(), ys.len()),
        ));
    }
    if xs.len() < 2 {
        return Err(Error::invalid(
            "pearson",
            format!("need at least 2 points, got {}", xs.len()),
        ));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in an input sequence".into(),
        ));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Correlation and quantile thresholds of the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PccParams {
    pub lambda_ca: f64,
    pub lambda_cq: f64,
}

impl Default for PccParams {
    fn default() -> Self {
        PccParams {
            lambda_ca: 0.5,
            lambda_cq: 0.9,
        }
    }
}

impl PccParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_ca) {
            return Err(Error::invalid(
                "pcc params",
                format!("lambda_ca must be in [0,1], got {}", self.lambda_ca),
            ));
        }
        if !(self.lambda_cq > 0.0 && self.lambda_cq < 1.0) {
            return Err(Error::invalid(
                "pcc params",
                format!("lambda_cq must be in (0,1), got {}", self.lambda_cq),
            ));
        }
        Ok(())
    }
}

/// Flag stragglers of one stage for one feature.
///
/// The feature is a candidate when |pearson(values, durations)| exceeds
/// `lambda_ca` over tasks with the feature present; each straggler whose
/// value strictly exceeds the stage's `lambda_cq` quantile of that feature
/// is then flagged. Undefined correlation flags nothing. Only stragglers
/// (under `straggler_multiplier`) are ever flagged so prediction sets stay
/// comparable with the rule-based analysis.
pub fn pcc_identify(
    stage_tasks: &[TaskRecord],
    vectors: &BTreeMap<TaskId, FeatureVector>,
    feature: FeatureName,
    params: &PccParams,
    straggler_multiplier: f64,
) -> Result<BTreeSet<TaskId>> {
    params.validate()?;
    let mut values = Vec::new();
    let mut durations = Vec::new();
    let mut present: BTreeMap<&str, f64> = BTreeMap::new();
    for task in stage_tasks {
        let fv = vectors.get(task.task_id()).ok_or_else(|| {
            Error::invalid(
                "pcc",
                format!("no feature vector for task {}", task.task_id()),
            )
        })?;
        if let Some(value) = fv.entry(feature).numeric() {
            values.push(value);
            durations.push(task.duration() as f64);
            present.insert(task.task_id(), value);
        }
    }
    if values.len() < 2 {
        return Ok(BTreeSet::new());
    }
    let rho = match pearson(&values, &durations) {
        Ok(rho) => rho,
        Err(Error::UndefinedCorrelation(_)) => return Ok(BTreeSet::new()),
        Err(e) => return Err(e),
    };
    if rho.abs() <= params.lambda_ca {
        return Ok(BTreeSet::new());
    }
    let cut = global_quantile(&values, params.lambda_cq)?;
    let mut flagged = BTreeSet::new();
    for straggler in find_stragglers(stage_tasks, straggler_multiplier)? {
        if let Some(&value) = present.get(straggler.task.task_id()) {
            if value > cut {
                flagged.insert(straggler.task.task_id().to_string());
            }
        }
    }
    Ok(flagged)
}

/// Run the baseline over every stage and feature of a bundle; returns the
/// flagged (task, resource kind) pairs used for ground-truth scoring.
pub fn pcc_resource_predictions(
    bundle: &TraceBundle,
    vectors_by_stage: &BTreeMap<String, BTreeMap<TaskId, FeatureVector>>,
    params: &PccParams,
    straggler_multiplier: f64,
) -> Result<BTreeSet<(TaskId, MetricKind)>> {
    let mut predictions = BTreeSet::new();
    for (stage_id, tasks) in bundle.stages() {
        let vectors = vectors_by_stage.get(stage_id).ok_or_else(|| {
            Error::invalid("pcc", format!("no feature vectors for stage {stage_id}"))
        })?;
        for kind in MetricKind::ALL {
            let flagged =
                pcc_identify(tasks, vectors, kind.feature(), params, straggler_multiplier)?;
            for task_id in flagged {
                predictions.insert((task_id, kind));
            }
        }
    }
    Ok(predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_stage_vectors;
    use crate::model::{Locality, MetricsIndex, TaskRecordInit};

    #[test]
    fn perfect_linear_correlation() {
        let xs: Vec<f64> = (1..=5).map(|v| v as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_undefined() {
        let xs = vec![4.0, 4.0, 4.0];
        let ys = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            pearson(&xs, &ys),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    fn stage_with_read_bytes(bytes_and_duration: &[(u64, i64)]) -> Vec<TaskRecord> {
        bytes_and_duration
            .iter()
            .enumerate()
            .map(|(i, &(bytes, duration))| {
                TaskRecord::new(TaskRecordInit {
                    task_id: format!("t{i}"),
                    stage_id: "s0".into(),
                    node_id: format!("n{}", i % 2 + 1),
                    start_time: 0,
                    end_time: duration,
                    locality: Locality::ProcessLocal,
                    read_bytes: bytes,
                    shuffle_read_bytes: 0,
                    shuffle_write_bytes: 0,
                    memory_bytes_spilled: 0,
                    disk_bytes_spilled: 0,
                    jvm_gc_time: 0,
                    serialize_time: 0,
                    deserialize_time: 0,
                })
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn correlated_feature_flags_straggler_at_max() {
        // read bytes scale linearly with duration; last task straggles
        let tasks = stage_with_read_bytes(&[
            (100, 1000),
            (110, 1100),
            (105, 1050),
            (100, 1000),
            (300, 3000),
        ]);
        let vectors = build_stage_vectors(&tasks, &MetricsIndex::new()).unwrap();
        let params = PccParams {
            lambda_ca: 0.5,
            lambda_cq: 0.7,
        };
        let flagged =
            pcc_identify(&tasks, &vectors, FeatureName::ReadBytes, &params, 1.5).unwrap();
        assert_eq!(flagged.into_iter().collect::<Vec<_>>(), vec!["t4"]);
    }

    #[test]
    fn uncorrelated_feature_flags_nothing() {
        let tasks = stage_with_read_bytes(&[
            (100, 1000),
            (300, 1100),
            (100, 1050),
            (300, 1000),
            (100, 3000),
        ]);
        let vectors = build_stage_vectors(&tasks, &MetricsIndex::new()).unwrap();
        let params = PccParams {
            lambda_ca: 0.9,
            lambda_cq: 0.5,
        };
        let flagged =
            pcc_identify(&tasks, &vectors, FeatureName::ReadBytes, &params, 1.5).unwrap();
        assert!(flagged.is_empty());
    }

    #[test]
    fn straggler_below_quantile_not_flagged() {
        // correlation exists but the straggler's own value is modest
        let tasks = stage_with_read_bytes(&[
            (100, 1000),
            (200, 1200),
            (300, 1400),
            (400, 1600),
            (120, 3000),
        ]);
        let vectors = build_stage_vectors(&tasks, &MetricsIndex::new()).unwrap();
        let params = PccParams {
            lambda_ca: 0.1,
            lambda_cq: 0.8,
        };
        let flagged =
            pcc_identify(&tasks, &vectors, FeatureName::ReadBytes, &params, 1.5).unwrap();
        assert!(flagged.is_empty());
    }

    #[test]
    fn constant_feature_cannot_fire() {
        let tasks = stage_with_read_bytes(&[(100, 1000), (100, 1100), (100, 3000)]);
        let vectors = build_stage_vectors(&tasks, &MetricsIndex::new()).unwrap();
        let params = PccParams::default();
        let flagged =
            pcc_identify(&tasks, &vectors, FeatureName::ReadBytes, &params, 1.5).unwrap();
        assert!(flagged.is_empty());
    }
}
