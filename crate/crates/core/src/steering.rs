//! Interventions as transition-matrix edits and the search for plans that
//! bring the projected role distribution closest to a target.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lifecycle::{is_valid_transition, project_distribution, project_trajectory, LifecycleError, MatrixKind, TransitionMatrix};
use crate::role::{DistributionVector, Role};

/// Largest number of subsets searched exhaustively.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SteeringError {
    #[error("invalid edit in {id}: {from}->{to} x{multiplier} ({reason})")]
    InvalidEdit {
        id: String,
        from: Role,
        to: Role,
        multiplier: f64,
        reason: &'static str,
    },
    #[error("row {0} has no mass left")]
    DegenerateRow(Role),
    #[error("intervention catalog is empty")]
    EmptyCatalog,
    #[error("duplicate intervention id {0}")]
    DuplicateId(String),
    #[error("unknown intervention id {0}")]
    UnknownId(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("intervention cost must be finite and non-negative: {0}")]
    InvalidCost(String),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
}

/// Total variation distance.
pub fn distance(a: &DistributionVector, b: &DistributionVector) -> f64 {
    0.5 * a
        .as_array()
        .iter()
        .zip(b.as_array())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

fn zero_bands() -> [f64; Role::COUNT] {
    [0.0; Role::COUNT]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    pub shares: DistributionVector,
    /// Acceptable absolute deviation per role, in role order.
    #[serde(default = "zero_bands", with = "bands")]
    pub tolerance: [f64; Role::COUNT],
}

mod bands {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::role::Role;

    pub fn serialize<S: Serializer>(t: &[f64; Role::COUNT], s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<String, f64> = Role::ALL.iter().map(|r| (r.to_string(), t[r.index()])).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; Role::COUNT], D::Error> {
        let m = BTreeMap::<Role, f64>::deserialize(d)?;
        let mut out = [0.0; Role::COUNT];
        for (r, v) in m {
            if !(v.is_finite() && v >= 0.0) {
                return Err(serde::de::Error::custom(format!("tolerance for {r} must be non-negative")));
            }
            out[r.index()] = v;
        }
        Ok(out)
    }
}

impl TargetDistribution {
    pub fn new(shares: DistributionVector) -> Self {
        TargetDistribution {
            shares,
            tolerance: zero_bands(),
        }
    }

    /// Every share within its band.
    pub fn is_met_by(&self, d: &DistributionVector) -> bool {
        Role::ALL
            .iter()
            .all(|&r| (d.share(r) - self.shares.share(r)).abs() <= self.tolerance[r.index()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub from: Role,
    pub to: Role,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub edits: Vec<Edit>,
    #[serde(default)]
    pub cost: f64,
}

impl InterventionSpec {
    pub fn validate(&self) -> Result<(), SteeringError> {
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(SteeringError::InvalidCost(self.id.clone()));
        }
        for e in &self.edits {
            let reason = if !is_valid_transition(e.from, e.to) {
                Some("transition not allowed")
            } else if !(e.multiplier.is_finite() && e.multiplier > 0.0) {
                Some("multiplier must be finite and positive")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(SteeringError::InvalidEdit {
                    id: self.id.clone(),
                    from: e.from,
                    to: e.to,
                    multiplier: e.multiplier,
                    reason,
                });
            }
        }
        Ok(())
    }
}

fn require_masked(m: &TransitionMatrix) -> Result<(), SteeringError> {
    if m.kind() != MatrixKind::GraphMasked {
        return Err(LifecycleError::InvalidMatrix("interventions need a graph-masked matrix".into()).into());
    }
    Ok(())
}

/// Multiplies edited cells and renormalizes the affected rows only.
pub fn apply_intervention(m: &TransitionMatrix, spec: &InterventionSpec) -> Result<TransitionMatrix, SteeringError> {
    require_masked(m)?;
    spec.validate()?;
    let mut rows = *m.rows();
    let mut touched = [false; Role::COUNT];
    for e in &spec.edits {
        rows[e.from.index()][e.to.index()] *= e.multiplier;
        touched[e.from.index()] = true;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        if !touched[i] {
            continue;
        }
        let s: f64 = row.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(SteeringError::DegenerateRow(Role::ALL[i]));
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
    Ok(TransitionMatrix::new(rows, MatrixKind::GraphMasked)?)
}

/// Applies `specs` in the given order.
pub fn apply_all<'a>(
    m: &TransitionMatrix,
    specs: impl IntoIterator<Item = &'a InterventionSpec>,
) -> Result<TransitionMatrix, SteeringError> {
    let mut cur = m.clone();
    for s in specs {
        cur = apply_intervention(&cur, s)?;
    }
    Ok(cur)
}

/// Distributions at steps `0..=steps` with `interventions` held fixed.
pub fn whatif(
    current: &DistributionVector,
    m: &TransitionMatrix,
    interventions: &[InterventionSpec],
    steps: usize,
) -> Result<Vec<DistributionVector>, SteeringError> {
    let edited = apply_all(m, interventions)?;
    Ok(project_trajectory(current, &edited, steps)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringPlan {
    /// Intervention ids in catalog order; empty for the baseline.
    pub interventions: Vec<String>,
    pub horizon: usize,
    pub projected: DistributionVector,
    pub residual: f64,
    pub total_cost: f64,
    pub meets_tolerance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub strategy: Strategy,
    /// Best first; always contains the empty plan.
    pub plans: Vec<SteeringPlan>,
}

impl Recommendation {
    pub fn best(&self) -> &SteeringPlan {
        &self.plans[0]
    }

    pub fn baseline(&self) -> &SteeringPlan {
        self.plans
            .iter()
            .find(|p| p.interventions.is_empty())
            .expect("baseline always evaluated")
    }
}

/// Number of subsets of size at most `max_len` from `n` items.
pub fn subset_count(n: usize, max_len: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 0..=max_len.min(n) {
        total = total.saturating_add(c);
        c = c.saturating_mul((n - k) as u128) / (k as u128 + 1);
    }
    total
}

struct Problem<'a> {
    current: &'a DistributionVector,
    m: &'a TransitionMatrix,
    target: &'a TargetDistribution,
    catalog: &'a [InterventionSpec],
    horizon: usize,
}

impl Problem<'_> {
    fn evaluate(&self, subset: &[usize]) -> Result<SteeringPlan, SteeringError> {
        let edited = apply_all(self.m, subset.iter().map(|&i| &self.catalog[i]))?;
        let projected = project_distribution(self.current, &edited, self.horizon)?;
        Ok(SteeringPlan {
            interventions: subset.iter().map(|&i| self.catalog[i].id.clone()).collect(),
            horizon: self.horizon,
            residual: distance(&projected, &self.target.shares),
            total_cost: subset.iter().map(|&i| self.catalog[i].cost).fold(0.0, |a, c| a + c),
            meets_tolerance: self.target.is_met_by(&projected),
            projected,
        })
    }

    fn evaluate_all(&self, subsets: &[Vec<usize>]) -> Result<Vec<SteeringPlan>, SteeringError> {
        subsets.par_iter().map(|s| self.evaluate(s)).collect()
    }
}

fn rank(a: &SteeringPlan, b: &SteeringPlan) -> Ordering {
    a.residual
        .total_cmp(&b.residual)
        .then(a.total_cost.total_cmp(&b.total_cost))
        .then_with(|| a.interventions.cmp(&b.interventions))
}

fn subsets_up_to(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len.min(n) {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l| l + 1);
            for i in start..n {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn exhaustive(p: &Problem<'_>, max_len: usize) -> Result<Vec<SteeringPlan>, SteeringError> {
    p.evaluate_all(&subsets_up_to(p.catalog.len(), max_len))
}

/// Forward selection: extends the current plan by its best single addition
/// until `max_len`, keeping every evaluated plan.
fn greedy(p: &Problem<'_>, max_len: usize) -> Result<Vec<SteeringPlan>, SteeringError> {
    let mut all = p.evaluate_all(&[Vec::new()])?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    while chosen.len() < max_len.min(p.catalog.len()) {
        let candidates: Vec<Vec<usize>> = (0..p.catalog.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| {
                let mut s = chosen.clone();
                s.push(i);
                s.sort_unstable();
                s
            })
            .filter(|s| seen.insert(s.clone()))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let plans = p.evaluate_all(&candidates)?;
        let best = (0..plans.len())
            .min_by(|&a, &b| rank(&plans[a], &plans[b]))
            .expect("non-empty candidates");
        chosen = candidates[best].clone();
        all.extend(plans);
    }
    Ok(all)
}

fn check_catalog(catalog: &[InterventionSpec]) -> Result<(), SteeringError> {
    if catalog.is_empty() {
        return Err(SteeringError::EmptyCatalog);
    }
    let mut ids = BTreeSet::new();
    for s in catalog {
        s.validate()?;
        if !ids.insert(s.id.as_str()) {
            return Err(SteeringError::DuplicateId(s.id.clone()));
        }
    }
    Ok(())
}

/// Ranks candidate plans using the requested strategy.
pub fn search(
    current: &DistributionVector,
    m: &TransitionMatrix,
    target: &TargetDistribution,
    catalog: &[InterventionSpec],
    horizon: usize,
    max_plan_len: usize,
    strategy: Strategy,
) -> Result<Recommendation, SteeringError> {
    check_catalog(catalog)?;
    require_masked(m)?;
    if horizon == 0 {
        return Err(SteeringError::InvalidParameter("horizon must be at least 1"));
    }
    if max_plan_len == 0 {
        return Err(SteeringError::InvalidParameter("max_plan_len must be at least 1"));
    }
    let p = Problem {
        current,
        m,
        target,
        catalog,
        horizon,
    };
    let mut plans = match strategy {
        Strategy::Exhaustive => exhaustive(&p, max_plan_len)?,
        Strategy::Greedy => greedy(&p, max_plan_len)?,
    };
    plans.sort_by(rank);
    Ok(Recommendation { strategy, plans })
}

/// Exhaustive search when at most [`EXHAUSTIVE_LIMIT`] subsets exist,
/// greedy forward selection otherwise.
pub fn recommend(
    current: &DistributionVector,
    m: &TransitionMatrix,
    target: &TargetDistribution,
    catalog: &[InterventionSpec],
    horizon: usize,
    max_plan_len: usize,
) -> Result<Recommendation, SteeringError> {
    let strategy = if subset_count(catalog.len(), max_plan_len) <= EXHAUSTIVE_LIMIT {
        Strategy::Exhaustive
    } else {
        Strategy::Greedy
    };
    search(current, m, target, catalog, horizon, max_plan_len, strategy)
}

/// Looks up catalog entries by id, preserving the order of `ids`.
pub fn select<'a>(catalog: &'a [InterventionSpec], ids: &[String]) -> Result<Vec<&'a InterventionSpec>, SteeringError> {
    ids.iter()
        .map(|id| {
            catalog
                .iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| SteeringError::UnknownId(id.clone()))
        })
        .collect()
}
