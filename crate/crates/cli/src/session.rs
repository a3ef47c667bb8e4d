//! Immutable analysis state derived from one event log and one config.

use std::collections::BTreeMap;

use rolecycle_core::classify::{FeatureVector, RoleAssignment};
use rolecycle_core::config::ThresholdConfig;
use rolecycle_core::event::{EventLog, MemberId, Window};
use rolecycle_core::lifecycle::{estimate_transition_matrix, validate_sequence, LifecycleError, TransitionEstimate, Violation};
use rolecycle_core::pipeline::{analyze_series, AssignmentSeries, SnapshotPlan};
use rolecycle_core::role::{DistributionVector, Role};
use serde::Serialize;

use crate::error::CliError;
use crate::files::SnapshotDistribution;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub window: Window,
    pub distribution: Option<DistributionVector>,
    pub assignments: BTreeMap<MemberId, RoleAssignment>,
    pub features: BTreeMap<MemberId, FeatureVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberViolations {
    pub member: MemberId,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOptions {
    pub plan: SnapshotPlan,
    pub smoothing: f64,
    pub min_dwell: usize,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub config: ThresholdConfig,
    pub options: SessionOptions,
    pub members: usize,
    pub events: usize,
    pub snapshots: Vec<Snapshot>,
    /// `None` when no member was seen in two consecutive snapshots.
    pub estimate: Option<TransitionEstimate>,
    pub violations: Vec<MemberViolations>,
}

/// Per-member role sequences from assignment rows in any order.
pub fn sequences_from_rows(rows: &[rolecycle_core::classify::AssignmentRow]) -> BTreeMap<MemberId, Vec<Role>> {
    let mut by_member: BTreeMap<MemberId, Vec<(i64, Role)>> = BTreeMap::new();
    for r in rows {
        by_member.entry(r.member.clone()).or_default().push((r.snapshot_from, r.role));
    }
    by_member
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_by_key(|&(t, _)| t);
            (id, v.into_iter().map(|(_, r)| r).collect())
        })
        .collect()
}

pub fn violation_report(sequences: &BTreeMap<MemberId, Vec<Role>>, min_dwell: usize) -> Vec<MemberViolations> {
    sequences
        .iter()
        .filter_map(|(id, seq)| {
            let violations = validate_sequence(seq, min_dwell);
            (!violations.is_empty()).then(|| MemberViolations {
                member: id.clone(),
                violations,
            })
        })
        .collect()
}

/// Estimate, or `None` when there is nothing to count.
pub fn estimate_or_none<S: AsRef<[Role]>>(
    sequences: &[S],
    smoothing: f64,
) -> Result<Option<TransitionEstimate>, CliError> {
    match estimate_transition_matrix(sequences, smoothing) {
        Ok(e) => Ok(Some(e)),
        Err(LifecycleError::NoObservations) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

impl Session {
    pub fn build(log: &EventLog, config: ThresholdConfig, options: SessionOptions) -> Result<Session, CliError> {
        let analyses = analyze_series(log, options.plan, &config)?;
        let series = AssignmentSeries::from_analyses(&analyses);
        let sequences: BTreeMap<MemberId, Vec<Role>> = series.roles().map(|(id, r)| (id.clone(), r)).collect();
        let seqs: Vec<&Vec<Role>> = sequences.values().collect();
        let estimate = estimate_or_none(&seqs, options.smoothing)?;
        let violations = violation_report(&sequences, options.min_dwell);
        let snapshots = analyses
            .into_iter()
            .map(|a| Snapshot {
                window: a.window,
                distribution: a.distribution,
                assignments: a.assignments,
                features: a.features,
            })
            .collect();
        Ok(Session {
            id: format!("log-{}-{}", log.len(), log.members().len()),
            config,
            options,
            members: log.members().len(),
            events: log.len(),
            snapshots,
            estimate,
            violations,
        })
    }

    /// Latest snapshot with a defined distribution.
    pub fn current(&self) -> Option<(usize, DistributionVector)> {
        self.snapshots
            .iter()
            .enumerate()
            .rev()
            .find_map(|(i, s)| s.distribution.map(|d| (i, d)))
    }

    pub fn snapshot_distributions(&self) -> Vec<SnapshotDistribution> {
        self.snapshots
            .iter()
            .enumerate()
            .map(|(i, s)| SnapshotDistribution {
                snapshot_index: i,
                from: s.window.from,
                to: s.window.to,
                members: s.assignments.len(),
                distribution: s.distribution,
            })
            .collect()
    }

    pub fn assignments(&self) -> impl Iterator<Item = &RoleAssignment> + '_ {
        self.snapshots.iter().flat_map(|s| s.assignments.values())
    }
}
