//! Threshold rules mapping a member's features to a role.
//!
//! Rules are tried in a fixed order: Departed, Visitor, Troll, Novice,
//! Leader, Active, Passive. A member matching no rule is Passive by default.
//! Every assignment records the comparisons that held so it can be replayed
//! against the features alone.

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityMeasures, LoginRecency, Relative, RelativeMeasures, SECONDS_PER_DAY};
use crate::config::{InvalidConfig, ThresholdConfig};
use crate::event::{MemberId, Window};
use crate::role::{Role, UnknownRole};
use crate::sna::CentralityRow;

/// Out-degree percentile at which unreciprocated relations count as troll
/// evidence.
pub const TROLL_OUT_DEGREE_PERCENTILE_MIN: f64 = 0.75;
/// Degree percentile band of an average member.
pub const ACTIVE_DEGREE_BAND: (f64, f64) = (0.25, 0.95);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SnaRelative {
    pub degree_total: Relative,
    pub degree_out: Relative,
    pub closeness: Relative,
    pub betweenness: Relative,
    pub eigenvector: Relative,
}

/// Everything the rules look at for one member in one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub member: MemberId,
    pub snapshot: Window,
    pub centrality: CentralityRow,
    pub sna_relative: SnaRelative,
    pub activity: ActivityMeasures,
    pub relative: RelativeMeasures,
    pub edge_churn: f64,
    pub has_signup: bool,
    pub explicit_departure: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    ExplicitDeparture,
    HasSignup,
    NeverLoggedIn,
    InactiveDays,
    DaysSinceSignup,
    Burstiness,
    FlagsReceived,
    Reciprocity,
    OutDegreePercentile,
    DegreePercentile,
    BrokerPercentile,
    PostPercentile,
    RecencyRatio,
    GapRatio,
    EdgeChurn,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::ExplicitDeparture => "explicit_departure",
            Measure::HasSignup => "has_signup",
            Measure::NeverLoggedIn => "never_logged_in",
            Measure::InactiveDays => "inactive_days",
            Measure::DaysSinceSignup => "days_since_signup",
            Measure::Burstiness => "burstiness",
            Measure::FlagsReceived => "flags_received",
            Measure::Reciprocity => "reciprocity",
            Measure::OutDegreePercentile => "out_degree_percentile",
            Measure::DegreePercentile => "degree_percentile",
            Measure::BrokerPercentile => "broker_percentile",
            Measure::PostPercentile => "post_percentile",
            Measure::RecencyRatio => "recency_ratio",
            Measure::GapRatio => "gap_ratio",
            Measure::EdgeChurn => "edge_churn",
        }
    }

    /// Value of the measure; `None` for sentinels. Flags are encoded 0/1.
    pub fn value(self, f: &FeatureVector) -> Option<f64> {
        let flag = |b: bool| Some(if b { 1.0 } else { 0.0 });
        match self {
            Measure::ExplicitDeparture => flag(f.explicit_departure),
            Measure::HasSignup => flag(f.has_signup),
            Measure::NeverLoggedIn => flag(f.activity.time_since_last_login == LoginRecency::Never),
            Measure::InactiveDays => f
                .activity
                .time_since_last_login
                .seconds()
                .map(|s| s / SECONDS_PER_DAY),
            Measure::DaysSinceSignup => f.activity.days_since_signup,
            Measure::Burstiness => f.activity.burstiness,
            Measure::FlagsReceived => Some(f.activity.flags_received as f64),
            Measure::Reciprocity => Some(f.centrality.reciprocity),
            Measure::OutDegreePercentile => f.sna_relative.degree_out.percentile,
            Measure::DegreePercentile => f.sna_relative.degree_total.percentile,
            Measure::BrokerPercentile => {
                let s = &f.sna_relative;
                [s.betweenness, s.closeness, s.eigenvector]
                    .iter()
                    .filter_map(|r| r.percentile)
                    .reduce(f64::max)
            }
            Measure::PostPercentile => f.relative.post_count.percentile,
            Measure::RecencyRatio => f.relative.time_since_last_login.ratio_to_mean,
            Measure::GapRatio => f.relative.mean_inter_login_gap.ratio_to_mean,
            Measure::EdgeChurn => Some(f.edge_churn),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
}

impl Op {
    fn holds(self, observed: f64, threshold: f64) -> bool {
        match self {
            Op::Le => observed <= threshold,
            Op::Ge => observed >= threshold,
            Op::Gt => observed > threshold,
            Op::Eq => observed == threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub measure: Measure,
    pub op: Op,
    pub observed: f64,
    pub threshold: f64,
}

impl Comparison {
    /// Re-evaluates the comparison on `features`.
    pub fn holds_for(&self, features: &FeatureVector) -> bool {
        self.measure
            .value(features)
            .is_some_and(|v| self.op.holds(v, self.threshold))
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}={}{}{}",
            self.measure.name(),
            self.observed,
            self.op.symbol(),
            self.threshold
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    Departed,
    Visitor,
    Troll,
    Novice,
    Leader,
    Active,
    Passive,
}

impl RuleId {
    pub const PRECEDENCE: [RuleId; 7] = [
        RuleId::Departed,
        RuleId::Visitor,
        RuleId::Troll,
        RuleId::Novice,
        RuleId::Leader,
        RuleId::Active,
        RuleId::Passive,
    ];

    pub fn role(self) -> Role {
        match self {
            RuleId::Departed => Role::Departed,
            RuleId::Visitor => Role::Visitor,
            RuleId::Troll => Role::Troll,
            RuleId::Novice => Role::Novice,
            RuleId::Leader => Role::Leader,
            RuleId::Active => Role::Active,
            RuleId::Passive => Role::Passive,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleId::Departed => "departed",
            RuleId::Visitor => "visitor",
            RuleId::Troll => "troll",
            RuleId::Novice => "novice",
            RuleId::Leader => "leader",
            RuleId::Active => "active",
            RuleId::Passive => "passive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    pub rule: RuleId,
    pub comparisons: Vec<Comparison>,
}

impl fmt::Display for FiredRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.rule.name())?;
        for (i, c) in self.comparisons.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub member: MemberId,
    pub role: Role,
    /// Reserved for community-specific refinements; never set by the engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_role: Option<String>,
    pub snapshot: Window,
    /// The winning rule with the comparisons that held; empty for the
    /// default role.
    pub fired_rules: Vec<FiredRule>,
}

impl RoleAssignment {
    /// Role implied by `fired_rules` if every recorded comparison still holds
    /// on `features`.
    pub fn replay(&self, features: &FeatureVector) -> Option<Role> {
        match self.fired_rules.as_slice() {
            [] => Some(Role::Passive),
            rules => {
                let all_hold = rules
                    .iter()
                    .all(|r| r.comparisons.iter().all(|c| c.holds_for(features)));
                all_hold.then(|| rules[rules.len() - 1].rule.role())
            }
        }
    }

    pub fn fired_rules_text(&self) -> String {
        self.fired_rules
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

struct Eval<'a> {
    f: &'a FeatureVector,
}

impl Eval<'_> {
    fn check(&self, measure: Measure, op: Op, threshold: f64) -> Option<Comparison> {
        let observed = measure.value(self.f)?;
        op.holds(observed, threshold).then_some(Comparison {
            measure,
            op,
            observed,
            threshold,
        })
    }

    fn all(&self, checks: &[(Measure, Op, f64)]) -> Option<Vec<Comparison>> {
        checks
            .iter()
            .map(|&(m, op, t)| self.check(m, op, t))
            .collect()
    }
}

fn evaluate(rule: RuleId, e: &Eval<'_>, cfg: &ThresholdConfig) -> Option<Vec<Comparison>> {
    use Measure::*;
    match rule {
        RuleId::Departed => e
            .all(&[(ExplicitDeparture, Op::Eq, 1.0)])
            .or_else(|| e.all(&[(InactiveDays, Op::Gt, cfg.departed_inactivity_days)]))
            .or_else(|| {
                e.all(&[
                    (NeverLoggedIn, Op::Eq, 1.0),
                    (DaysSinceSignup, Op::Gt, cfg.departed_inactivity_days),
                ])
            }),
        RuleId::Visitor => e.all(&[(HasSignup, Op::Eq, 0.0)]),
        RuleId::Troll => {
            let mut held = e.all(&[(Burstiness, Op::Ge, cfg.troll_burstiness_min)])?;
            let evidence = e
                .all(&[(FlagsReceived, Op::Ge, cfg.troll_flags_min as f64)])
                .or_else(|| {
                    e.all(&[
                        (Reciprocity, Op::Le, cfg.troll_reciprocity_max),
                        (OutDegreePercentile, Op::Ge, TROLL_OUT_DEGREE_PERCENTILE_MIN),
                    ])
                })?;
            held.extend(evidence);
            Some(held)
        }
        RuleId::Novice => e.all(&[(DaysSinceSignup, Op::Le, cfg.novice_max_days)]),
        RuleId::Leader => e.all(&[
            (DegreePercentile, Op::Ge, cfg.leader_degree_percentile_min),
            (BrokerPercentile, Op::Ge, cfg.leader_broker_percentile_min),
            (PostPercentile, Op::Ge, cfg.leader_activity_percentile_min),
        ]),
        RuleId::Active => e.all(&[
            (RecencyRatio, Op::Le, cfg.active_recency_ratio_max),
            (GapRatio, Op::Le, cfg.active_gap_ratio_max),
            (DegreePercentile, Op::Ge, ACTIVE_DEGREE_BAND.0),
            (DegreePercentile, Op::Le, ACTIVE_DEGREE_BAND.1),
        ]),
        RuleId::Passive => {
            let mut held = e
                .all(&[(PostPercentile, Op::Le, cfg.passive_post_percentile_max)])
                .or_else(|| e.all(&[(GapRatio, Op::Ge, cfg.passive_gap_ratio_min)]))?;
            held.extend(e.all(&[(EdgeChurn, Op::Le, cfg.passive_churn_max)])?);
            Some(held)
        }
    }
}

/// Assigns exactly one role. Pure in `(features, config)`.
pub fn classify(features: &FeatureVector, config: &ThresholdConfig) -> Result<RoleAssignment, InvalidConfig> {
    config.validate()?;
    Ok(classify_unchecked(features, config))
}

pub(crate) fn classify_unchecked(features: &FeatureVector, config: &ThresholdConfig) -> RoleAssignment {
    let e = Eval { f: features };
    let fired = RuleId::PRECEDENCE
        .iter()
        .find_map(|&rule| evaluate(rule, &e, config).map(|comparisons| FiredRule { rule, comparisons }));
    let (role, fired_rules) = match fired {
        Some(r) => (r.rule.role(), vec![r]),
        None => (Role::Passive, Vec::new()),
    };
    RoleAssignment {
        member: features.member.clone(),
        role,
        sub_role: None,
        snapshot: features.snapshot,
        fired_rules,
    }
}

/// Whether the Departed rule fires; it reads no community-relative measure.
pub(crate) fn departed(features: &FeatureVector, config: &ThresholdConfig) -> bool {
    evaluate(RuleId::Departed, &Eval { f: features }, config).is_some()
}

/// One row of the assignments CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub member: MemberId,
    pub snapshot_from: i64,
    pub snapshot_to: i64,
    pub role: Role,
    pub fired_rules: String,
}

impl From<&RoleAssignment> for AssignmentRow {
    fn from(a: &RoleAssignment) -> Self {
        AssignmentRow {
            member: a.member.clone(),
            snapshot_from: a.snapshot.from,
            snapshot_to: a.snapshot.to,
            role: a.role,
            fired_rules: a.fired_rules_text(),
        }
    }
}

/// CSV with header `member,snapshot_from,snapshot_to,role,fired_rules`.
pub fn write_assignments_csv<'a, W: io::Write>(
    out: W,
    assignments: impl IntoIterator<Item = &'a RoleAssignment>,
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["member", "snapshot_from", "snapshot_to", "role", "fired_rules"])?;
    for a in assignments {
        w.serialize(AssignmentRow::from(a))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum AssignmentCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Role(#[from] UnknownRole),
}

pub fn read_assignments_csv<R: io::Read>(input: R) -> Result<Vec<AssignmentRow>, AssignmentCsvError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn role_of(f: &FeatureVector) -> Role {
        classify(f, &ThresholdConfig::default()).unwrap().role
    }

    #[test]
    fn twenty_percent_shorter_gap_is_active() {
        // member gap 800 s against a community mean of 1000 s
        let f = average_member();
        assert_eq!(f.relative.mean_inter_login_gap.ratio_to_mean, Some(800.0 / 1000.0));
        let a = classify(&f, &ThresholdConfig::default()).unwrap();
        assert_eq!(a.role, Role::Active);
        let gap = a.fired_rules[0]
            .comparisons
            .iter()
            .find(|c| c.measure == Measure::GapRatio)
            .unwrap();
        assert_eq!((gap.op, gap.observed, gap.threshold), (Op::Le, 0.8, 0.8));

        let mut slower = f.clone();
        slower.relative.mean_inter_login_gap.ratio_to_mean = Some(801.0 / 1000.0);
        assert_ne!(role_of(&slower), Role::Active);
    }

    #[test]
    fn no_signup_is_visitor() {
        let mut f = average_member();
        f.has_signup = false;
        f.activity.days_since_signup = None;
        f.activity.burstiness = Some(1.0);
        f.activity.flags_received = 10;
        assert_eq!(role_of(&f), Role::Visitor);
    }

    #[test]
    fn recent_signup_is_novice() {
        let mut f = average_member();
        f.activity.days_since_signup = Some(3.0);
        assert_eq!(role_of(&f), Role::Novice);
        f.activity.days_since_signup = Some(14.0);
        assert_eq!(role_of(&f), Role::Novice);
        f.activity.days_since_signup = Some(14.01);
        assert_eq!(role_of(&f), Role::Active);
    }

    #[test]
    fn troll_beats_novice() {
        let mut f = average_member();
        f.activity.days_since_signup = Some(3.0);
        f.activity.burstiness = Some(0.95);
        f.activity.flags_received = 5;
        let a = classify(&f, &ThresholdConfig::default()).unwrap();
        assert_eq!(a.role, Role::Troll);
        assert_eq!(a.fired_rules[0].rule, RuleId::Troll);
    }

    #[test]
    fn troll_by_unreciprocated_out_degree() {
        let mut f = average_member();
        f.activity.burstiness = Some(0.9);
        f.centrality.reciprocity = 0.1;
        f.sna_relative.degree_out = rel(0.8, 3.0);
        assert_eq!(role_of(&f), Role::Troll);
        f.sna_relative.degree_out = rel(0.7, 3.0);
        assert_ne!(role_of(&f), Role::Troll);
    }

    #[test]
    fn departed_by_flag_or_inactivity() {
        let mut f = average_member();
        f.explicit_departure = true;
        assert_eq!(role_of(&f), Role::Departed);

        let mut f = average_member();
        f.activity.time_since_last_login = LoginRecency::Seconds(91.0 * SECONDS_PER_DAY);
        assert_eq!(role_of(&f), Role::Departed);
        f.activity.time_since_last_login = LoginRecency::Seconds(90.0 * SECONDS_PER_DAY);
        assert_ne!(role_of(&f), Role::Departed);

        let mut f = average_member();
        f.activity.time_since_last_login = LoginRecency::Never;
        f.activity.days_since_signup = Some(120.0);
        assert_eq!(role_of(&f), Role::Departed);
    }

    #[test]
    fn leader_needs_degree_brokerage_and_activity() {
        let mut f = average_member();
        f.sna_relative.degree_total = rel(0.96, 4.0);
        f.sna_relative.eigenvector = rel(0.92, 2.0);
        f.relative.post_count = rel(0.8, 3.0);
        assert_eq!(role_of(&f), Role::Leader);
        f.relative.post_count = rel(0.7, 1.5);
        // too central for an average member, not active enough for a leader
        assert_eq!(role_of(&f), Role::Passive);
    }

    #[test]
    fn passive_rule_and_default() {
        let mut f = average_member();
        f.relative.mean_inter_login_gap = rel(0.9, 2.0);
        f.edge_churn = 0.1;
        let a = classify(&f, &ThresholdConfig::default()).unwrap();
        assert_eq!(a.role, Role::Passive);
        assert_eq!(a.fired_rules[0].rule, RuleId::Passive);

        f.edge_churn = 0.5;
        let a = classify(&f, &ThresholdConfig::default()).unwrap();
        assert_eq!(a.role, Role::Passive);
        assert!(a.fired_rules.is_empty());
    }

    #[test]
    fn sentinels_never_satisfy_thresholds() {
        let mut f = average_member();
        f.relative.mean_inter_login_gap = Relative::default();
        f.activity.mean_inter_login_gap = None;
        assert_ne!(role_of(&f), Role::Active);
    }

    #[test]
    fn replay_reproduces_role() {
        let f = average_member();
        let a = classify(&f, &ThresholdConfig::default()).unwrap();
        assert_eq!(a.replay(&f), Some(a.role));
        let mut changed = f.clone();
        changed.relative.time_since_last_login.ratio_to_mean = Some(5.0);
        assert_eq!(a.replay(&changed), None);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ThresholdConfig {
            passive_churn_max: -1.0,
            ..ThresholdConfig::default()
        };
        assert!(classify(&average_member(), &cfg).is_err());
    }

    #[test]
    fn assignments_csv_round_trip() {
        let a = classify(&average_member(), &ThresholdConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_assignments_csv(&mut buf, [&a]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("member,snapshot_from,snapshot_to,role,fired_rules\nm,0,1209600,Active,active["));
        let rows = read_assignments_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, vec![AssignmentRow::from(&a)]);
    }
}
