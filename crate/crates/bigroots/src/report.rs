//! Versioned JSON report schemas emitted by the batch commands.
//!
//! Reports are deterministic: map keys are ordered, no timestamps or host
//! details are embedded, and the effective configuration is echoed so a
//! report is reproducible from its own header.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Rates, RocPoint};
use crate::model::{
    AnalysisConfig, Cause, ConfusionMatrix, FilteredCandidate, RootCauseReport, StageId, TaskId,
};
use crate::pcc::PccParams;

pub const REPORT_FORMAT_VERSION: &str = "1";

/// Full effective configuration: analysis thresholds plus baseline
/// parameters. Serialized flat, so config files and report echoes share
/// one key set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToolConfig {
    pub analysis: AnalysisConfig,
    pub pcc: PccParams,
}

impl ToolConfig {
    pub fn validate(&self) -> Result<()> {
        self.analysis.validate()?;
        self.pcc.validate()
    }

    /// Parse the flat JSON config: analysis keys at top level plus
    /// `pcc_lambda_ca` / `pcc_lambda_cq`. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        let mut pcc = PccParams::default();
        if let Some(v) = map.remove("pcc_lambda_ca") {
            pcc.lambda_ca = v
                .as_f64()
                .ok_or_else(|| Error::parse("config", "pcc_lambda_ca must be a number"))?;
        }
        if let Some(v) = map.remove("pcc_lambda_cq") {
            pcc.lambda_cq = v
                .as_f64()
                .ok_or_else(|| Error::parse("config", "pcc_lambda_cq must be a number"))?;
        }
        let analysis: AnalysisConfig = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| Error::parse("config", e.to_string()))?;
        Ok(ToolConfig { analysis, pcc })
    }

    /// The flat key-value form used in files and report echoes.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut map = match serde_json::to_value(&self.analysis) {
            Ok(serde_json::Value::Object(map)) => map,
            _ => unreachable!("analysis config serializes to an object"),
        };
        map.insert("pcc_lambda_ca".into(), self.pcc.lambda_ca.into());
        map.insert("pcc_lambda_cq".into(), self.pcc.lambda_cq.into());
        serde_json::Value::Object(map)
    }
}

impl Serialize for ToolConfig {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ToolConfig {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        ToolConfig::from_json(&value.to_string()).map_err(serde::de::Error::custom)
    }
}

/// One straggler in the analysis report, with placement context.
#[derive(Debug, Clone, Serialize)]
pub struct StragglerReport {
    pub task_id: TaskId,
    pub node_id: String,
    pub duration_ms: i64,
    pub straggler_scale: f64,
    pub causes: Vec<Cause>,
    pub filtered: Vec<FilteredCandidate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage_id: StageId,
    pub task_count: usize,
    pub median_duration_ms: f64,
    pub stragglers: Vec<StragglerReport>,
}

/// Cause-kind tallies: how many stragglers each feature was blamed for.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub stage_count: usize,
    pub task_count: usize,
    pub straggler_count: usize,
    pub cause_counts: BTreeMap<String, usize>,
    pub unattributed_stragglers: usize,
}

/// Output of the `analyze` command.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub format_version: &'static str,
    pub config: ToolConfig,
    pub warnings: Vec<String>,
    pub stages: Vec<StageReport>,
    pub summary: AnalysisSummary,
}

pub fn summarize(stages: &[StageReport]) -> AnalysisSummary {
    let mut cause_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut straggler_count = 0;
    let mut unattributed = 0;
    for stage in stages {
        straggler_count += stage.stragglers.len();
        for s in &stage.stragglers {
            let mut features: Vec<&str> = s.causes.iter().map(|c| c.feature.as_str()).collect();
            features.sort_unstable();
            features.dedup();
            if features.is_empty() {
                unattributed += 1;
            }
            for f in features {
                *cause_counts.entry(f.to_string()).or_default() += 1;
            }
        }
    }
    AnalysisSummary {
        stage_count: stages.len(),
        task_count: stages.iter().map(|s| s.task_count).sum(),
        straggler_count,
        cause_counts,
        unattributed_stragglers: unattributed,
    }
}

/// Reports keyed by task id, for stitching stage reports together.
pub fn index_reports(reports: Vec<RootCauseReport>) -> BTreeMap<TaskId, RootCauseReport> {
    reports
        .into_iter()
        .map(|r| (r.task_id.clone(), r))
        .collect()
}

/// Per-method scoring block of the `evaluate` command.
#[derive(Debug, Clone, Serialize)]
pub struct MethodEvaluation {
    pub confusion: ConfusionMatrix,
    pub rates: Rates,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
}

/// Output of the `evaluate` command.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub format_version: &'static str,
    pub config: ToolConfig,
    pub universe_size: usize,
    pub positive_pairs: usize,
    pub methods: BTreeMap<String, MethodEvaluation>,
    /// `auc(bigroots) - auc(pcc)` when both methods were evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_difference: Option<f64>,
}

/// Threshold grids for both methods, as read from a grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub bigroots: BigrootsGrid,
    pub pcc: PccGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BigrootsGrid {
    pub lambda_q: Vec<f64>,
    pub lambda_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PccGrid {
    pub lambda_ca: Vec<f64>,
    pub lambda_cq: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        // both grids run from permissive (tpr-saturating) to strict
        // (fpr-free) so the ROC envelopes cover the full tradeoff
        GridSpec {
            bigroots: BigrootsGrid {
                lambda_q: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
                lambda_p: vec![0.7, 0.9, 1.0, 1.2, 1.5, 2.0, 2.5],
            },
            pcc: PccGrid {
                lambda_ca: vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
                lambda_cq: vec![0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            },
        }
    }
}

impl GridSpec {
    pub fn bigroots_grid(&self) -> crate::eval::SweepGrid {
        crate::eval::SweepGrid {
            first: self.bigroots.lambda_q.clone(),
            second: self.bigroots.lambda_p.clone(),
        }
    }

    pub fn pcc_grid(&self) -> crate::eval::SweepGrid {
        crate::eval::SweepGrid {
            first: self.pcc.lambda_ca.clone(),
            second: self.pcc.lambda_cq.clone(),
        }
    }
}

/// Per-method aggregate of a multi-bundle sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepMethodSummary {
    pub per_bundle_auc: BTreeMap<String, f64>,
    pub mean_auc: f64,
}

/// Output of the `sweep` command (`summary.json`).
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub format_version: &'static str,
    pub config: ToolConfig,
    pub grid: GridSpec,
    pub bundles: Vec<String>,
    pub methods: BTreeMap<String, SweepMethodSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tool_config_round_trips_flat_keys() {
        let cfg = ToolConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("straggler_multiplier"));
        assert!(text.contains("pcc_lambda_ca"));
        let back = ToolConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn tool_config_rejects_unknown_keys() {
        assert!(ToolConfig::from_json(r#"{"peer_lambda": 2.0}"#).is_err());
    }

    #[test]
    fn tool_config_partial_overrides() {
        let cfg =
            ToolConfig::from_json(r#"{"peer_lambda_p": 2.0, "pcc_lambda_cq": 0.8}"#).unwrap();
        assert_eq!(cfg.analysis.peer_lambda_p, 2.0);
        assert_eq!(cfg.pcc.lambda_cq, 0.8);
        assert_eq!(cfg.analysis.quantile_lambda_q, 0.9);
    }
}
