//! Snapshot analysis: graph, centralities, activity, relatives, roles.
//!
//! A member belongs to every snapshot ending after their first appearance in
//! the log. The community level is formed by signed-up members whose
//! Departed rule does not fire; everyone else is measured against it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::{measures_from_events, ActivityBaseline, Baseline, Relative};
use crate::classify::{classify_unchecked, departed, FeatureVector, RoleAssignment, SnaRelative};
use crate::config::{InvalidConfig, ThresholdConfig};
use crate::event::{EventKind, EventLog, EventRecord, InvalidWindow, MemberId, Timestamp, Window};
use crate::graph::{graph_from_events, jaccard_churn, InteractionGraph};
use crate::role::{DistributionVector, Role};
use crate::sna::{CentralityReport, CentralityRow, SnaError, DEFAULT_EIGEN_MAX_ITER, DEFAULT_EIGEN_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] InvalidConfig),
    #[error(transparent)]
    Window(#[from] InvalidWindow),
    #[error(transparent)]
    Sna(#[from] SnaError),
    #[error("snapshot step and width must be positive (width {width}, step {step})")]
    InvalidPlan { width: i64, step: i64 },
}

#[derive(Debug, Clone, Default)]
struct MemberHistory {
    first_seen: Option<Timestamp>,
    signup: Option<Timestamp>,
    departure: Option<Timestamp>,
    logins: Vec<Timestamp>,
}

/// Per-member lookups over a whole log, built once and shared by snapshots.
#[derive(Debug, Clone)]
pub struct LogIndex<'a> {
    log: &'a EventLog,
    members: BTreeMap<MemberId, MemberHistory>,
}

impl<'a> LogIndex<'a> {
    pub fn new(log: &'a EventLog) -> Self {
        let mut members: BTreeMap<MemberId, MemberHistory> = log
            .members()
            .iter()
            .map(|(id, info)| {
                let h = MemberHistory {
                    signup: info.signup,
                    ..MemberHistory::default()
                };
                (id.clone(), h)
            })
            .collect();
        for e in log.events() {
            for id in std::iter::once(&e.member).chain(e.target.as_ref()) {
                let h = members.get_mut(id).expect("log members cover all ids");
                h.first_seen.get_or_insert(e.timestamp);
            }
            let h = members.get_mut(&e.member).expect("log members cover all ids");
            match e.kind {
                EventKind::Login => h.logins.push(e.timestamp),
                EventKind::Departure => {
                    h.departure.get_or_insert(e.timestamp);
                }
                _ => {}
            }
        }
        LogIndex { log, members }
    }

    pub fn log(&self) -> &'a EventLog {
        self.log
    }

    /// Members already seen before `t`.
    pub fn present_before(&self, t: Timestamp) -> impl Iterator<Item = &MemberId> + '_ {
        self.members
            .iter()
            .filter(move |(_, h)| h.first_seen.is_some_and(|f| f < t))
            .map(|(id, _)| id)
    }

    pub fn first_seen(&self, id: &MemberId) -> Option<Timestamp> {
        self.members.get(id).and_then(|h| h.first_seen)
    }

    fn last_login_before(&self, h: &MemberHistory, t: Timestamp) -> Option<Timestamp> {
        let k = h.logins.partition_point(|&x| x < t);
        k.checked_sub(1).map(|i| h.logins[i])
    }
}

/// Everything computed for one snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotAnalysis {
    pub window: Window,
    pub graph: InteractionGraph,
    pub centrality: CentralityReport,
    pub features: BTreeMap<MemberId, FeatureVector>,
    pub assignments: BTreeMap<MemberId, RoleAssignment>,
    /// `None` when the snapshot has no members.
    pub distribution: Option<DistributionVector>,
}

fn relative_sna(baselines: &[Option<Baseline>; 5], row: &CentralityRow) -> SnaRelative {
    let rel = |i: usize, v: f64| -> Relative {
        baselines[i]
            .as_ref()
            .map(|b| b.relative(Some(v)))
            .unwrap_or_default()
    };
    SnaRelative {
        degree_total: rel(0, row.degree_total),
        degree_out: rel(1, row.degree_out),
        closeness: rel(2, row.closeness),
        betweenness: rel(3, row.betweenness),
        eigenvector: rel(4, row.eigenvector),
    }
}

fn sna_values(row: &CentralityRow) -> [f64; 5] {
    [
        row.degree_total,
        row.degree_out,
        row.closeness,
        row.betweenness,
        row.eigenvector,
    ]
}

/// Analyses `window`, evaluating time-dependent measures at `now`. Edge churn
/// compares against the equally wide window immediately before.
pub fn analyze_snapshot(
    index: &LogIndex<'_>,
    window: Window,
    now: Timestamp,
    config: &ThresholdConfig,
) -> Result<SnapshotAnalysis, PipelineError> {
    config.validate()?;
    let log = index.log();
    let events = log.events_in(window);
    let graph = graph_from_events(events, window, config.edge_semantics);
    let centrality = CentralityReport::compute(&graph, DEFAULT_EIGEN_TOLERANCE, DEFAULT_EIGEN_MAX_ITER)?;

    let prev = Window::new(window.from.saturating_sub(window.len()), window.from)?;
    let prev_graph = graph_from_events(log.events_in(prev), prev, config.edge_semantics);

    let mut own: HashMap<&MemberId, Vec<&EventRecord>> = HashMap::new();
    for e in events {
        own.entry(&e.member).or_default().push(e);
    }

    let horizon = window.to.min(now.saturating_add(1));
    let members: Vec<&MemberId> = index.present_before(window.to).collect();
    let mut features: Vec<FeatureVector> = members
        .par_iter()
        .map(|&id| {
            let h = &index.members[id];
            let signup = h.signup.filter(|&s| s < window.to);
            let activity = measures_from_events(
                own.get(id).into_iter().flatten().copied(),
                signup,
                index.last_login_before(h, horizon),
                window,
                now,
                config.burst_window_fraction,
            );
            let edge_churn = jaccard_churn(&prev_graph.undirected_neighbors(id), &graph.undirected_neighbors(id));
            FeatureVector {
                member: id.clone(),
                snapshot: window,
                centrality: centrality.row(id),
                sna_relative: SnaRelative::default(),
                activity,
                relative: Default::default(),
                edge_churn,
                has_signup: signup.is_some(),
                explicit_departure: h.departure.is_some_and(|d| d < window.to),
            }
        })
        .collect();

    let reference: Vec<&FeatureVector> = features
        .iter()
        .filter(|f| f.has_signup && !departed(f, config))
        .collect();
    let activity_baseline = ActivityBaseline::new(reference.iter().map(|f| &f.activity));
    let sna_baselines: [Option<Baseline>; 5] =
        std::array::from_fn(|i| Baseline::new(reference.iter().map(|f| sna_values(&f.centrality)[i])));

    features.par_iter_mut().for_each(|f| {
        f.relative = activity_baseline.relative(&f.activity);
        f.sna_relative = relative_sna(&sna_baselines, &f.centrality);
    });

    let assignments: BTreeMap<MemberId, RoleAssignment> = features
        .par_iter()
        .map(|f| (f.member.clone(), classify_unchecked(f, config)))
        .collect();
    let mut counts = [0usize; Role::COUNT];
    for a in assignments.values() {
        counts[a.role.index()] += 1;
    }
    let distribution = DistributionVector::from_counts(&counts).ok();
    let features = features.into_iter().map(|f| (f.member.clone(), f)).collect();
    Ok(SnapshotAnalysis {
        window,
        graph,
        centrality,
        features,
        assignments,
        distribution,
    })
}

/// Full pipeline over one window.
pub fn classify_all(
    log: &EventLog,
    window: Window,
    config: &ThresholdConfig,
    now: Timestamp,
) -> Result<(BTreeMap<MemberId, RoleAssignment>, Option<DistributionVector>), PipelineError> {
    let a = analyze_snapshot(&LogIndex::new(log), window, now, config)?;
    Ok((a.assignments, a.distribution))
}

/// Sliding snapshots `[origin + i*step, origin + i*step + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotPlan {
    pub width: i64,
    pub step: i64,
    /// Defaults to the first non-signup event rounded down to a multiple of
    /// `step`.
    pub origin: Option<Timestamp>,
}

impl SnapshotPlan {
    pub fn new(width: i64, step: i64) -> Self {
        SnapshotPlan {
            width,
            step,
            origin: None,
        }
    }

    pub fn with_origin(mut self, origin: Timestamp) -> Self {
        self.origin = Some(origin);
        self
    }

    /// Windows starting no later than the last event.
    pub fn windows(&self, log: &EventLog) -> Result<Vec<Window>, PipelineError> {
        if self.width <= 0 || self.step <= 0 {
            return Err(PipelineError::InvalidPlan {
                width: self.width,
                step: self.step,
            });
        }
        let Some(last) = log.last_timestamp() else {
            return Ok(Vec::new());
        };
        let origin = match self.origin {
            Some(o) => o,
            None => {
                let first = log
                    .events()
                    .iter()
                    .find(|e| e.kind != EventKind::Signup)
                    .or(log.events().first())
                    .map(|e| e.timestamp)
                    .unwrap_or(last);
                first.div_euclid(self.step) * self.step
            }
        };
        let mut out = Vec::new();
        let mut start = origin;
        while start <= last {
            out.push(Window::new(start, start.saturating_add(self.width))?);
            start = start.saturating_add(self.step);
        }
        Ok(out)
    }
}

/// Analyses every snapshot of `plan`. Each is evaluated at its window end,
/// or just after the last event for a window reaching past the log.
pub fn analyze_series(
    log: &EventLog,
    plan: SnapshotPlan,
    config: &ThresholdConfig,
) -> Result<Vec<SnapshotAnalysis>, PipelineError> {
    config.validate()?;
    let index = LogIndex::new(log);
    let end = log.last_timestamp().map_or(Timestamp::MAX, |t| t.saturating_add(1));
    plan.windows(log)?
        .into_iter()
        .map(|w| analyze_snapshot(&index, w, w.to.min(end), config))
        .collect()
}

/// Role sequences per member in chronological order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentSeries {
    pub snapshots: Vec<Window>,
    pub members: BTreeMap<MemberId, Vec<RoleAssignment>>,
}

impl AssignmentSeries {
    pub fn from_analyses(analyses: &[SnapshotAnalysis]) -> Self {
        let mut members: BTreeMap<MemberId, Vec<RoleAssignment>> = BTreeMap::new();
        for a in analyses {
            for (id, r) in &a.assignments {
                members.entry(id.clone()).or_default().push(r.clone());
            }
        }
        AssignmentSeries {
            snapshots: analyses.iter().map(|a| a.window).collect(),
            members,
        }
    }

    pub fn roles(&self) -> impl Iterator<Item = (&MemberId, Vec<Role>)> + '_ {
        self.members
            .iter()
            .map(|(id, s)| (id, s.iter().map(|a| a.role).collect()))
    }

    pub fn role_sequences(&self) -> Vec<Vec<Role>> {
        self.roles().map(|(_, r)| r).collect()
    }

    pub fn member_ids(&self) -> BTreeSet<&MemberId> {
        self.members.keys().collect()
    }
}

pub fn assignment_series(
    log: &EventLog,
    plan: SnapshotPlan,
    config: &ThresholdConfig,
) -> Result<AssignmentSeries, PipelineError> {
    Ok(AssignmentSeries::from_analyses(&analyze_series(log, plan, config)?))
}
