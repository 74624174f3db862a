//! Straggler detection and peer-group construction within a stage.

use crate::error::{Error, Result};
use crate::model::TaskRecord;

/// Median task duration of a stage; even counts average the two central
/// values.
pub fn median_duration(stage_tasks: &[TaskRecord]) -> Result<f64> {
    if stage_tasks.is_empty() {
        return Err(Error::EmptyInput("stage has no tasks".into()));
    }
    let mut durations: Vec<i64> = stage_tasks.iter().map(TaskRecord::duration).collect();
    durations.sort_unstable();
    let mid = durations.len() / 2;
    Ok(if durations.len() % 2 == 1 {
        durations[mid] as f64
    } else {
        (durations[mid - 1] + durations[mid]) as f64 / 2.0
    })
}

/// A detected straggler and its scale (duration over stage median).
#[derive(Debug, Clone, Copy)]
pub struct Straggler<'a> {
    pub task: &'a TaskRecord,
    pub scale: f64,
}

/// Tasks whose duration strictly exceeds `multiplier` times the stage
/// median. Equality does not count, so stages of identical durations never
/// yield stragglers.
// negated comparison so a NaN multiplier is rejected too
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn find_stragglers<'a>(
    stage_tasks: &'a [TaskRecord],
    multiplier: f64,
) -> Result<Vec<Straggler<'a>>> {
    if !(multiplier > 1.0) {
        return Err(Error::invalid(
            "straggler multiplier",
            format!("must be > 1, got {multiplier}"),
        ));
    }
    let median = median_duration(stage_tasks)?;
    Ok(stage_tasks
        .iter()
        .filter(|t| t.duration() as f64 > multiplier * median)
        .map(|task| Straggler {
            task,
            scale: task.duration() as f64 / median,
        })
        .collect())
}

/// The two comparison sets for one task: same-stage tasks on the same node
/// and same-stage tasks on other nodes. The subject task is in neither.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerGroups {
    pub intra_node: Vec<String>,
    pub inter_node: Vec<String>,
}

pub fn peer_groups(task: &TaskRecord, stage_tasks: &[TaskRecord]) -> Result<PeerGroups> {
    if !stage_tasks.iter().any(|t| t.task_id() == task.task_id()) {
        return Err(Error::invalid(
            "peer groups",
            format!("task {} is not part of the given stage", task.task_id()),
        ));
    }
    let mut intra_node = Vec::new();
    let mut inter_node = Vec::new();
    for peer in stage_tasks {
        if peer.task_id() == task.task_id() {
            continue;
        }
        if peer.node_id() == task.node_id() {
            intra_node.push(peer.task_id().to_string());
        } else {
            inter_node.push(peer.task_id().to_string());
        }
    }
    Ok(PeerGroups {
        intra_node,
        inter_node,
    })
}
