//! Scoring against ground truth: confusion matrices, FPR/TPR/ACC, ROC
//! sweeps over threshold grids, and the area under the ROC envelope.
//!
//! Scoring is per (task, resource kind) pair: injected anomalies only
//! perturb resources, so framework-feature causes never enter the matrix.
//! The evaluation universe is the set of straggler tasks crossed with the
//! three resource kinds; both identification methods only ever flag
//! stragglers, so predictions always sit inside the universe.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TraceBundle;
use crate::model::{AnalysisConfig, ConfusionMatrix, MetricKind, TaskId};
use crate::pcc::{pcc_resource_predictions, PccParams};
use crate::rootcause::{resource_predictions, PreparedBundle};

pub type Labels = BTreeMap<TaskId, BTreeSet<MetricKind>>;
pub type Prediction = (TaskId, MetricKind);

/// Count TP/FP/FN/TN over an explicit universe of (task, kind) pairs.
///
/// Every prediction must be inside the universe; truth entries outside it
/// are ignored (they concern pairs the evaluation does not judge).
pub fn confusion(
    predicted: &BTreeSet<Prediction>,
    truth: &Labels,
    universe: &BTreeSet<Prediction>,
) -> Result<ConfusionMatrix> {
    if let Some(outside) = predicted.iter().find(|p| !universe.contains(*p)) {
        return Err(Error::invalid(
            "confusion",
            format!(
                "prediction ({}, {}) outside the evaluation universe",
                outside.0, outside.1
            ),
        ));
    }
    let mut m = ConfusionMatrix::default();
    for pair in universe {
        let labeled = truth
            .get(&pair.0)
            .map(|kinds| kinds.contains(&pair.1))
            .unwrap_or(false);
        let flagged = predicted.contains(pair);
        match (flagged, labeled) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// FPR/TPR/ACC with undefined rates kept explicit (`None`) when the
/// corresponding denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub fpr: Option<f64>,
    pub tpr: Option<f64>,
    pub acc: Option<f64>,
}

pub fn rates(m: &ConfusionMatrix) -> Rates {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    Rates {
        fpr: ratio(m.fp, m.fp + m.tn),
        tpr: ratio(m.tp, m.tp + m.fn_),
        acc: ratio(m.tp + m.tn, m.total()),
    }
}

/// Identification method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bigroots,
    Pcc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bigroots => "bigroots",
            Method::Pcc => "pcc",
        }
    }
}

/// One ROC point and the threshold pair that generated it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// (lambda_q, lambda_p) for the rule-based method,
    /// (lambda_ca, lambda_cq) for the correlation baseline.
    pub thresholds: [f64; 2],
}

/// Threshold grid for one method; the sweep evaluates the cross product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.first.is_empty() || self.second.is_empty() {
            return Err(Error::EmptyInput("sweep grid has an empty axis".into()));
        }
        Ok(())
    }
}

/// The straggler-pair universe of a prepared bundle.
pub fn straggler_universe(prepared: &PreparedBundle<'_>) -> BTreeSet<Prediction> {
    let mut universe = BTreeSet::new();
    for id in prepared.straggler_ids() {
        for kind in MetricKind::ALL {
            universe.insert((id.clone(), kind));
        }
    }
    universe
}

fn point_for(
    predicted: &BTreeSet<Prediction>,
    truth: &Labels,
    universe: &BTreeSet<Prediction>,
    thresholds: [f64; 2],
) -> Result<RocPoint> {
    let m = confusion(predicted, truth, universe)?;
    let r = rates(&m);
    Ok(RocPoint {
        fpr: r.fpr.unwrap_or(0.0),
        tpr: r.tpr.unwrap_or(0.0),
        thresholds,
    })
}

/// Evaluate a method over every cell of its threshold grid.
///
/// Points come back sorted by (fpr, tpr). Undefined rates on a degenerate
/// universe are reported as 0.
pub fn roc_sweep(
    bundle: &TraceBundle,
    truth: &Labels,
    method: Method,
    grid: &SweepGrid,
    cfg: &AnalysisConfig,
) -> Result<Vec<RocPoint>> {
    grid.validate()?;
    cfg.validate()?;
    let prepared = PreparedBundle::prepare(bundle, cfg)?;
    let universe = straggler_universe(&prepared);
    let mut points = Vec::with_capacity(grid.first.len() * grid.second.len());
    match method {
        Method::Bigroots => {
            for &lambda_q in &grid.first {
                if !(lambda_q > 0.0 && lambda_q < 1.0) {
                    return Err(Error::invalid(
                        "sweep grid",
                        format!("lambda_q must be in (0,1), got {lambda_q}"),
                    ));
                }
                for &lambda_p in &grid.second {
                    let reports = prepared.analyze(lambda_q, lambda_p);
                    let predicted = resource_predictions(&reports);
                    points.push(point_for(
                        &predicted,
                        truth,
                        &universe,
                        [lambda_q, lambda_p],
                    )?);
                }
            }
        }
        Method::Pcc => {
            let mut vectors_by_stage = BTreeMap::new();
            for prep in prepared.stages() {
                vectors_by_stage.insert(prep.stage_id().to_string(), prep.vectors().clone());
            }
            for &lambda_ca in &grid.first {
                for &lambda_cq in &grid.second {
                    let params = PccParams {
                        lambda_ca,
                        lambda_cq,
                    };
                    let predicted = pcc_resource_predictions(
                        bundle,
                        &vectors_by_stage,
                        &params,
                        cfg.straggler_multiplier,
                    )?;
                    points.push(point_for(
                        &predicted,
                        truth,
                        &universe,
                        [lambda_ca, lambda_cq],
                    )?);
                }
            }
        }
    }
    points.sort_by(|a, b| {
        (a.fpr, a.tpr)
            .partial_cmp(&(b.fpr, b.tpr))
            .expect("rates are finite")
    });
    Ok(points)
}

/// Area under the upper envelope of a ROC point cloud.
///
/// The points are augmented with (0,0) and (1,1), reduced to their Pareto
/// front (strictly increasing tpr as fpr grows), extended horizontally to
/// fpr = 1, and integrated with the trapezoid rule. Dominated points never
/// change the result.
pub fn auc(points: &[RocPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("auc of no points".into()));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));

    let mut envelope: Vec<(f64, f64)> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for (fpr, tpr) in pts {
        if tpr > best {
            envelope.push((fpr, tpr));
            best = tpr;
        }
    }
    let &(last_fpr, last_tpr) = envelope.last().expect("envelope is non-empty");
    if last_fpr < 1.0 {
        envelope.push((1.0, last_tpr));
    }

    let mut area = 0.0;
    for pair in envelope.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok(area.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(task: &str, kind: MetricKind) -> Prediction {
        (task.to_string(), kind)
    }

    fn universe_4() -> BTreeSet<Prediction> {
        [
            pair("t1", MetricKind::Cpu),
            pair("t1", MetricKind::Disk),
            pair("t2", MetricKind::Cpu),
            pair("t2", MetricKind::Disk),
        ]
        .into_iter()
        .collect()
    }

    fn truth_t1_cpu() -> Labels {
        let mut truth = Labels::new();
        truth.insert("t1".into(), [MetricKind::Cpu].into_iter().collect());
        truth
    }

    #[test]
    fn confusion_exact_match() {
        let predicted: BTreeSet<_> = [pair("t1", MetricKind::Cpu)].into_iter().collect();
        let m = confusion(&predicted, &truth_t1_cpu(), &universe_4()).unwrap();
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (1, 3, 0, 0));
    }

    #[test]
    fn confusion_empty_prediction() {
        let m = confusion(&BTreeSet::new(), &truth_t1_cpu(), &universe_4()).unwrap();
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (0, 3, 0, 1));
    }

    #[test]
    fn confusion_disjoint_prediction() {
        let predicted: BTreeSet<_> = [pair("t2", MetricKind::Disk)].into_iter().collect();
        let m = confusion(&predicted, &truth_t1_cpu(), &universe_4()).unwrap();
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (0, 2, 1, 1));
    }

    #[test]
    fn confusion_rejects_prediction_outside_universe() {
        let predicted: BTreeSet<_> = [pair("t9", MetricKind::Cpu)].into_iter().collect();
        assert!(confusion(&predicted, &truth_t1_cpu(), &universe_4()).is_err());
    }

    #[test]
    fn counts_partition_universe() {
        let predicted: BTreeSet<_> = [pair("t1", MetricKind::Cpu), pair("t2", MetricKind::Cpu)]
            .into_iter()
            .collect();
        let m = confusion(&predicted, &truth_t1_cpu(), &universe_4()).unwrap();
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn published_rate_fixtures() {
        let r = rates(&ConfusionMatrix::new(43, 282, 1, 28));
        assert!((r.fpr.unwrap() * 100.0 - 0.35).abs() < 0.01);
        assert!((r.tpr.unwrap() * 100.0 - 60.56).abs() < 0.01);
        assert!((r.acc.unwrap() * 100.0 - 91.81).abs() < 0.01);

        let r = rates(&ConfusionMatrix::new(47, 237, 46, 24));
        assert!((r.fpr.unwrap() * 100.0 - 16.25).abs() < 0.01);
        assert!((r.tpr.unwrap() * 100.0 - 66.19).abs() < 0.01);
        assert!((r.acc.unwrap() * 100.0 - 80.22).abs() < 0.01);
    }

    #[test]
    fn undefined_rates_are_none() {
        let r = rates(&ConfusionMatrix::new(0, 5, 0, 0));
        assert_eq!(r.fpr, Some(0.0));
        assert_eq!(r.tpr, None);
        assert_eq!(r.acc, Some(1.0));
    }

    fn p(fpr: f64, tpr: f64) -> RocPoint {
        RocPoint {
            fpr,
            tpr,
            thresholds: [0.0, 0.0],
        }
    }

    #[test]
    fn auc_fixtures() {
        assert!((auc(&[p(0.0, 1.0)]).unwrap() - 1.0).abs() < 1e-12);
        assert!((auc(&[p(0.5, 0.5)]).unwrap() - 0.5).abs() < 1e-12);
        assert!((auc(&[p(0.0, 0.5), p(0.5, 1.0)]).unwrap() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_dominated_points() {
        let base = vec![p(0.2, 0.8)];
        let with_dominated = vec![p(0.2, 0.8), p(0.3, 0.8), p(0.5, 0.1)];
        assert_eq!(auc(&base).unwrap(), auc(&with_dominated).unwrap());
    }

    #[test]
    fn auc_empty_is_error() {
        assert!(auc(&[]).is_err());
    }
}
