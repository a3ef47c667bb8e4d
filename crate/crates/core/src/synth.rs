//! Seeded synthetic communities with known roles.
//!
//! Every agent walks a ground-truth transition matrix once per snapshot and
//! emits the events of its current role. The generator is single threaded
//! and draws from one PCG32 stream, so output depends only on
//! `(profile, members, days, seed)`.

use std::collections::BTreeMap;
use std::io;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngExt;
use rand_distr::{Exp, LogNormal, Poisson};
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::event::{EventKind, EventLog, EventRecord, IngestError, MemberId, Timestamp};
use crate::lifecycle::{is_valid_transition, MatrixKind, TransitionMatrix};
use crate::role::{DistributionVector, Role};

const DAY: i64 = 86_400;
const HOUR: i64 = 3_600;
/// Width of a troll burst.
pub const BURST_SECONDS: i64 = 3 * HOUR;
/// Stream selector of the generator; the seed is the PCG32 state.
pub const PCG_STREAM: u64 = 0x0a02_bdbf_7bb3_c0a7;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("members and days must be at least 1")]
    InvalidSize,
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Behaviour of an agent while it holds one role. Rates are per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleBehavior {
    /// Mean seconds between logins; 0 means the role never logs in.
    pub login_gap_mean: f64,
    pub login_gap_stddev: f64,
    pub post_rate: f64,
    /// Directed interactions (replies and explicit edges).
    pub edge_formation_rate: f64,
    pub edge_drop_rate: f64,
    pub reaction_rate: f64,
    /// Chance that a snapshot's activity is compressed into one burst.
    pub burst_probability: f64,
    /// Moderation flags received.
    pub flag_rate: f64,
    /// Relative weight as an interaction target.
    pub attractiveness: f64,
}

impl Default for RoleBehavior {
    fn default() -> Self {
        RoleBehavior {
            login_gap_mean: 0.0,
            login_gap_stddev: 0.0,
            post_rate: 0.0,
            edge_formation_rate: 0.0,
            edge_drop_rate: 0.0,
            reaction_rate: 0.0,
            burst_probability: 0.0,
            flag_rate: 0.0,
            attractiveness: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleBehaviors {
    pub visitor: RoleBehavior,
    pub novice: RoleBehavior,
    pub active: RoleBehavior,
    pub leader: RoleBehavior,
    pub passive: RoleBehavior,
    pub troll: RoleBehavior,
}

impl RoleBehaviors {
    /// Departed agents are inert.
    pub fn get(&self, role: Role) -> Option<&RoleBehavior> {
        match role {
            Role::Visitor => Some(&self.visitor),
            Role::Novice => Some(&self.novice),
            Role::Active => Some(&self.active),
            Role::Leader => Some(&self.leader),
            Role::Passive => Some(&self.passive),
            Role::Troll => Some(&self.troll),
            Role::Departed => None,
        }
    }

    /// Every rate zero.
    pub fn inert() -> Self {
        let z = RoleBehavior::default();
        RoleBehaviors {
            visitor: z.clone(),
            novice: z.clone(),
            active: z.clone(),
            leader: z.clone(),
            passive: z.clone(),
            troll: z,
        }
    }
}

impl Default for RoleBehaviors {
    fn default() -> Self {
        let d = DAY as f64;
        RoleBehaviors {
            visitor: RoleBehavior {
                reaction_rate: 0.3,
                ..RoleBehavior::default()
            },
            novice: RoleBehavior {
                login_gap_mean: 2.0 * d,
                login_gap_stddev: 0.5 * d,
                post_rate: 0.3,
                edge_formation_rate: 0.5,
                reaction_rate: 0.3,
                attractiveness: 1.0,
                ..RoleBehavior::default()
            },
            active: RoleBehavior {
                login_gap_mean: 0.7 * d,
                login_gap_stddev: 0.2 * d,
                post_rate: 1.5,
                edge_formation_rate: 1.5,
                edge_drop_rate: 0.05,
                reaction_rate: 1.0,
                attractiveness: 2.0,
                ..RoleBehavior::default()
            },
            leader: RoleBehavior {
                login_gap_mean: 0.5 * d,
                login_gap_stddev: 0.1 * d,
                post_rate: 20.0,
                edge_formation_rate: 6.0,
                reaction_rate: 2.0,
                attractiveness: 10.0,
                ..RoleBehavior::default()
            },
            passive: RoleBehavior {
                login_gap_mean: 6.0 * d,
                login_gap_stddev: 2.0 * d,
                post_rate: 0.05,
                ..RoleBehavior::default()
            },
            troll: RoleBehavior {
                post_rate: 1.0,
                edge_formation_rate: 0.7,
                reaction_rate: 0.5,
                burst_probability: 1.0,
                flag_rate: 0.5,
                ..RoleBehavior::default()
            },
        }
    }
}

mod matrix_table {
    //! Transition matrix as a table `from -> to -> probability`.
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::lifecycle::{MatrixKind, TransitionMatrix};
    use crate::role::Role;

    pub fn serialize<S: Serializer>(m: &TransitionMatrix, s: S) -> Result<S::Ok, S::Error> {
        let table: BTreeMap<String, BTreeMap<String, f64>> = Role::ALL
            .iter()
            .map(|&from| {
                let row = Role::ALL
                    .iter()
                    .filter(|&&to| m.get(from, to) != 0.0)
                    .map(|&to| (to.to_string(), m.get(from, to)))
                    .collect();
                (from.to_string(), row)
            })
            .collect();
        table.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TransitionMatrix, D::Error> {
        let table = BTreeMap::<Role, BTreeMap<Role, f64>>::deserialize(d)?;
        let mut rows = [[0.0; Role::COUNT]; Role::COUNT];
        for from in Role::ALL {
            match table.get(&from) {
                Some(row) => {
                    for (&to, &p) in row {
                        rows[from.index()][to.index()] = p;
                    }
                }
                None => rows[from.index()][from.index()] = 1.0,
            }
        }
        TransitionMatrix::new(rows, MatrixKind::GraphMasked).map_err(serde::de::Error::custom)
    }
}

/// Complete generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorProfile {
    pub snapshot_days: u32,
    /// Start of snapshot 0; a multiple of the snapshot width keeps the
    /// default snapshot origin aligned with the generator.
    pub start_timestamp: Timestamp,
    /// New members per day after the founding cohort.
    pub entry_rate: f64,
    /// Share of newcomers arriving as visitors instead of signing up at once.
    pub entry_visitor_probability: f64,
    /// Share of `members` present at the start; all of them when
    /// `entry_rate` is 0.
    pub founding_share: f64,
    /// Roles of the founding cohort; Departed must be 0.
    pub initial_distribution: DistributionVector,
    /// Share of directed interactions emitted as replies rather than
    /// explicit edges.
    pub reply_share: f64,
    pub roles: RoleBehaviors,
    /// Ground-truth transition matrix.
    #[serde(with = "matrix_table")]
    pub transitions: TransitionMatrix,
}

fn dist(pairs: &[(Role, f64)]) -> DistributionVector {
    let mut a = [0.0; Role::COUNT];
    for &(r, x) in pairs {
        a[r.index()] = x;
    }
    DistributionVector::new(a).expect("fixture distribution")
}

/// Default ground-truth transitions.
pub fn default_transitions() -> TransitionMatrix {
    use Role::*;
    let rows_of = |pairs: &[(Role, f64)]| *dist(pairs).as_array();
    let rows = [
        rows_of(&[(Visitor, 0.4), (Novice, 0.5), (Departed, 0.1)]),
        rows_of(&[(Active, 0.55), (Passive, 0.3), (Troll, 0.08), (Departed, 0.07)]),
        rows_of(&[(Active, 0.86), (Passive, 0.07), (Leader, 0.03), (Troll, 0.01), (Departed, 0.03)]),
        rows_of(&[(Leader, 0.9), (Active, 0.07), (Passive, 0.01), (Departed, 0.02)]),
        rows_of(&[(Passive, 0.88), (Active, 0.07), (Departed, 0.05)]),
        rows_of(&[(Troll, 0.1), (Departed, 0.9)]),
        rows_of(&[(Departed, 1.0)]),
    ];
    TransitionMatrix::new(rows, MatrixKind::GraphMasked).expect("default transitions are valid")
}

impl Default for BehaviorProfile {
    fn default() -> Self {
        use Role::*;
        BehaviorProfile {
            snapshot_days: 14,
            start_timestamp: 1_700_697_600,
            entry_rate: 0.4,
            entry_visitor_probability: 0.5,
            founding_share: 0.6,
            initial_distribution: dist(&[
                (Visitor, 0.05),
                (Novice, 0.07),
                (Active, 0.38),
                (Leader, 0.08),
                (Passive, 0.37),
                (Troll, 0.05),
            ]),
            reply_share: 0.5,
            roles: RoleBehaviors::default(),
            transitions: default_transitions(),
        }
    }
}

impl BehaviorProfile {
    /// One founding novice, no newcomers, no activity.
    pub fn inert() -> Self {
        BehaviorProfile {
            entry_rate: 0.0,
            initial_distribution: DistributionVector::point(Role::Novice),
            roles: RoleBehaviors::inert(),
            ..BehaviorProfile::default()
        }
    }

    pub fn snapshot_seconds(&self) -> i64 {
        i64::from(self.snapshot_days) * DAY
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        if self.snapshot_days == 0 {
            return bad("snapshot_days must be at least 1".into());
        }
        if self.start_timestamp < 0 {
            return bad("start_timestamp must be non-negative".into());
        }
        for (name, v) in [
            ("entry_rate", self.entry_rate),
            ("entry_visitor_probability", self.entry_visitor_probability),
            ("founding_share", self.founding_share),
            ("reply_share", self.reply_share),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        for (name, v) in [
            ("entry_visitor_probability", self.entry_visitor_probability),
            ("founding_share", self.founding_share),
            ("reply_share", self.reply_share),
        ] {
            if v > 1.0 {
                return bad(format!("{name} must not exceed 1"));
            }
        }
        if self.initial_distribution.share(Role::Departed) > 0.0 {
            return bad("initial_distribution may not contain Departed".into());
        }
        for from in Role::ALL {
            for to in Role::ALL {
                if self.transitions.get(from, to) > 0.0 && !is_valid_transition(from, to) {
                    return bad(format!("transition {from}->{to} is not allowed"));
                }
            }
        }
        for role in Role::ALL {
            let Some(b) = self.roles.get(role) else { continue };
            let fields = [
                ("login_gap_mean", b.login_gap_mean),
                ("login_gap_stddev", b.login_gap_stddev),
                ("post_rate", b.post_rate),
                ("edge_formation_rate", b.edge_formation_rate),
                ("edge_drop_rate", b.edge_drop_rate),
                ("reaction_rate", b.reaction_rate),
                ("burst_probability", b.burst_probability),
                ("flag_rate", b.flag_rate),
                ("attractiveness", b.attractiveness),
            ];
            for (name, v) in fields {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("{role}.{name} must be finite and non-negative"));
                }
            }
            if b.burst_probability > 1.0 {
                return bad(format!("{role}.burst_probability must not exceed 1"));
            }
            if b.login_gap_mean == 0.0 && b.login_gap_stddev > 0.0 {
                return bad(format!("{role}.login_gap_stddev needs a positive mean"));
            }
        }
        let v = &self.roles.visitor;
        if v.login_gap_mean > 0.0 || v.post_rate > 0.0 || v.edge_formation_rate > 0.0 || v.edge_drop_rate > 0.0 {
            return bad("visitors have no account: only reactions are possible".into());
        }
        Ok(())
    }
}

/// True role of every member in every snapshot since their arrival.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub start_timestamp: Timestamp,
    pub snapshot_seconds: i64,
    pub snapshot_count: usize,
    /// First snapshot index and the roles from there on.
    pub members: BTreeMap<MemberId, (usize, Vec<Role>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub member: MemberId,
    pub snapshot_index: usize,
    pub true_role: Role,
}

impl GroundTruth {
    pub fn role_at(&self, member: &MemberId, snapshot: usize) -> Option<Role> {
        let (first, roles) = self.members.get(member)?;
        roles.get(snapshot.checked_sub(*first)?).copied()
    }

    pub fn sequences(&self) -> Vec<&[Role]> {
        self.members.values().map(|(_, r)| r.as_slice()).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = GroundTruthRow> + '_ {
        self.members.iter().flat_map(|(id, (first, roles))| {
            roles.iter().enumerate().map(move |(k, &r)| GroundTruthRow {
                member: id.clone(),
                snapshot_index: first + k,
                true_role: r,
            })
        })
    }

    /// Share of each role at snapshot `k` among members present then.
    pub fn distribution_at(&self, k: usize) -> Option<DistributionVector> {
        let mut counts = [0usize; Role::COUNT];
        for id in self.members.keys() {
            if let Some(r) = self.role_at(id, k) {
                counts[r.index()] += 1;
            }
        }
        DistributionVector::from_counts(&counts).ok()
    }

    /// CSV with header `member,snapshot_index,true_role`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["member", "snapshot_index", "true_role"])?;
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows back; snapshot geometry is not part of the CSV.
    pub fn read_rows<R: io::Read>(input: R) -> csv::Result<Vec<GroundTruthRow>> {
        csv::Reader::from_reader(input).deserialize().collect()
    }

    /// Mean dwell per role in snapshots, estimated as exposures over exits;
    /// `None` for roles never left or never occupied.
    pub fn dwell_estimates(&self) -> [Option<f64>; Role::COUNT] {
        let mut exposures = [0u64; Role::COUNT];
        let mut exits = [0u64; Role::COUNT];
        for (_, roles) in self.members.values() {
            for p in roles.windows(2) {
                exposures[p[0].index()] += 1;
                if p[0] != p[1] {
                    exits[p[0].index()] += 1;
                }
            }
        }
        std::array::from_fn(|i| (exits[i] > 0).then(|| exposures[i] as f64 / exits[i] as f64))
    }
}

/// Expected dwell in snapshots for a self-loop probability.
pub fn expected_dwell(self_loop: f64) -> Option<f64> {
    (self_loop < 1.0).then(|| 1.0 / (1.0 - self_loop))
}

struct Agent {
    id: MemberId,
    arrival: usize,
    arrival_time: Timestamp,
    founding: bool,
    roles: Vec<Role>,
    signup: Option<Timestamp>,
    next_login: Option<Timestamp>,
    neighbors: Vec<usize>,
}

fn poisson(rng: &mut Pcg32, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive lambda").sample(rng) as u64
}

fn gap(rng: &mut Pcg32, b: &RoleBehavior) -> i64 {
    let g = if b.login_gap_stddev == 0.0 {
        b.login_gap_mean
    } else {
        LogNormal::from_mean_cv(b.login_gap_mean, b.login_gap_stddev / b.login_gap_mean)
            .expect("validated gap parameters")
            .sample(rng)
    };
    (g.round() as i64).max(1)
}

fn uniform(rng: &mut Pcg32, lo: i64, hi: i64) -> i64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Builds a community of at most `members` agents over `days` days.
pub fn generate(
    profile: &BehaviorProfile,
    members: usize,
    days: u32,
    seed: u64,
) -> Result<(EventLog, GroundTruth), SynthError> {
    profile.validate()?;
    if members == 0 || days == 0 {
        return Err(SynthError::InvalidSize);
    }
    let mut rng = Pcg32::new(seed, PCG_STREAM);
    let start = profile.start_timestamp;
    let snap = profile.snapshot_seconds();
    let end = start + i64::from(days) * DAY;
    let n_snap = (days as usize).div_ceil(profile.snapshot_days as usize);
    let width = members.to_string().len().max(4);
    let name = |i: usize| MemberId::new(format!("u{i:0width$}")).expect("non-empty id");

    let founding = if profile.entry_rate == 0.0 {
        members
    } else {
        ((profile.founding_share * members as f64).round() as usize).min(members)
    };
    let initial = WeightedIndex::new(profile.initial_distribution.as_array()).map_err(|e| SynthError::InvalidProfile(e.to_string()))?;
    let mut agents: Vec<Agent> = Vec::with_capacity(members);
    for i in 0..founding {
        let role = Role::ALL[initial.sample(&mut rng)];
        agents.push(Agent {
            id: name(i),
            arrival: 0,
            arrival_time: start,
            founding: true,
            roles: vec![role],
            signup: None,
            next_login: None,
            neighbors: Vec::new(),
        });
    }
    if profile.entry_rate > 0.0 {
        let arrivals = Exp::new(profile.entry_rate / DAY as f64).expect("positive rate");
        let mut t = start as f64;
        for i in founding..members {
            t += arrivals.sample(&mut rng);
            if t >= end as f64 {
                break;
            }
            let at = t as i64;
            let role = if rng.random::<f64>() < profile.entry_visitor_probability {
                Role::Visitor
            } else {
                Role::Novice
            };
            agents.push(Agent {
                id: name(i),
                arrival: ((at - start) / snap) as usize,
                arrival_time: at,
                founding: false,
                roles: vec![role],
                signup: None,
                next_login: None,
                neighbors: Vec::new(),
            });
        }
    }
    let rows = profile.transitions.rows();
    let steps: Vec<WeightedIndex<f64>> = rows
        .iter()
        .map(|r| WeightedIndex::new(r).expect("stochastic rows"))
        .collect();
    for a in &mut agents {
        for _ in a.arrival + 1..n_snap {
            let cur = *a.roles.last().expect("non-empty");
            a.roles.push(Role::ALL[steps[cur.index()].sample(&mut rng)]);
        }
    }

    let mut events = Vec::new();
    for k in 0..n_snap {
        let s = start + k as i64 * snap;
        let e = (s + snap).min(end);
        let role_of = |a: &Agent| (k >= a.arrival).then(|| a.roles[k - a.arrival]);
        let present: Vec<usize> = (0..agents.len()).filter(|&i| role_of(&agents[i]).is_some()).collect();
        let weights: Vec<f64> = present
            .iter()
            .map(|&i| {
                role_of(&agents[i])
                    .and_then(|r| profile.roles.get(r))
                    .map_or(0.0, |b| b.attractiveness)
            })
            .collect();
        let targets = WeightedIndex::new(&weights).ok();

        for ai in present.iter().copied() {
            let role = role_of(&agents[ai]).expect("present");
            let prev = (k > agents[ai].arrival).then(|| agents[ai].roles[k - 1 - agents[ai].arrival]);
            let id = agents[ai].id.clone();

            if role == Role::Departed {
                if prev != Some(Role::Departed) {
                    events.push(EventRecord::new(id, EventKind::Departure, s));
                }
                continue;
            }
            let behavior = profile.roles.get(role).expect("non-departed role");

            // Arrival and signup bookkeeping.
            let mut from = s;
            if k == agents[ai].arrival {
                let a = &agents[ai];
                let t = if a.founding { s + uniform(&mut rng, 0, DAY) } else { a.arrival_time };
                match role {
                    Role::Visitor => {
                        let target = pick(&mut rng, targets.as_ref(), &present, ai).unwrap_or(ai);
                        let target = agents[target].id.clone();
                        events.push(EventRecord::new(id.clone(), EventKind::Reaction, t).with_target(target));
                        from = t;
                    }
                    Role::Novice => {
                        agents[ai].signup = Some(t);
                        events.push(EventRecord::new(id.clone(), EventKind::Signup, t));
                        from = t + 1;
                    }
                    _ => {
                        let ago = uniform(&mut rng, 30 * DAY, 400 * DAY);
                        agents[ai].signup = Some(s - ago);
                        events.push(EventRecord::new(id.clone(), EventKind::Signup, s - ago));
                    }
                }
            } else if prev == Some(Role::Visitor) && role == Role::Novice {
                let t = s + uniform(&mut rng, 0, HOUR);
                agents[ai].signup = Some(t);
                events.push(EventRecord::new(id.clone(), EventKind::Signup, t));
                from = t + 1;
            }
            if from >= e {
                continue;
            }

            let bursting = behavior.burst_probability > 0.0 && rng.random::<f64>() < behavior.burst_probability;
            let (lo, hi) = if bursting {
                let b = uniform(&mut rng, from, (e - BURST_SECONDS).max(from + 1));
                (b, (b + BURST_SECONDS).min(e))
            } else {
                (from, e)
            };
            let span_days = (e - from) as f64 / DAY as f64;

            // Logins.
            if bursting {
                events.push(EventRecord::new(id.clone(), EventKind::Login, lo));
                agents[ai].next_login = None;
            } else if behavior.login_gap_mean > 0.0 {
                if prev != Some(role) || agents[ai].next_login.is_none() {
                    let g = gap(&mut rng, behavior).min(e - from);
                    agents[ai].next_login = Some(from + uniform(&mut rng, 0, g));
                }
                while let Some(t) = agents[ai].next_login.filter(|&t| t < e) {
                    events.push(EventRecord::new(id.clone(), EventKind::Login, t));
                    agents[ai].next_login = Some(t + gap(&mut rng, behavior));
                }
            } else {
                agents[ai].next_login = None;
            }

            for _ in 0..poisson(&mut rng, behavior.post_rate * span_days) {
                let t = uniform(&mut rng, lo, hi);
                let size = uniform(&mut rng, 40, 2_000) as u64;
                events.push(EventRecord::new(id.clone(), EventKind::Post, t).with_payload(size));
            }
            for _ in 0..poisson(&mut rng, behavior.edge_formation_rate * span_days) {
                let t = uniform(&mut rng, lo, hi);
                let reply = rng.random::<f64>() < profile.reply_share;
                let Some(target) = pick(&mut rng, targets.as_ref(), &present, ai) else { continue };
                agents[ai].neighbors.push(target);
                let target = agents[target].id.clone();
                let rec = if reply {
                    let size = uniform(&mut rng, 20, 800) as u64;
                    EventRecord::new(id.clone(), EventKind::Reply, t).with_payload(size)
                } else {
                    EventRecord::new(id.clone(), EventKind::EdgeAdd, t)
                };
                events.push(rec.with_target(target));
            }
            for _ in 0..poisson(&mut rng, behavior.reaction_rate * span_days) {
                let t = uniform(&mut rng, lo, hi);
                let Some(target) = pick(&mut rng, targets.as_ref(), &present, ai) else { continue };
                let target = agents[target].id.clone();
                events.push(EventRecord::new(id.clone(), EventKind::Reaction, t).with_target(target));
            }
            for _ in 0..poisson(&mut rng, behavior.edge_drop_rate * span_days) {
                let n = agents[ai].neighbors.len();
                if n == 0 {
                    break;
                }
                let t = uniform(&mut rng, lo, hi);
                let gone = agents[ai].neighbors.swap_remove(rng.random_range(0..n));
                let target = agents[gone].id.clone();
                events.push(EventRecord::new(id.clone(), EventKind::EdgeRemove, t).with_target(target));
            }
            for _ in 0..poisson(&mut rng, behavior.flag_rate * span_days) {
                let t = uniform(&mut rng, lo, hi);
                events.push(EventRecord::new(id.clone(), EventKind::ModerationFlag, t));
            }
        }
    }

    let log = EventLog::from_records(events)?;
    let truth = GroundTruth {
        start_timestamp: start,
        snapshot_seconds: snap,
        snapshot_count: n_snap,
        members: agents.into_iter().map(|a| (a.id, (a.arrival, a.roles))).collect(),
    };
    Ok((log, truth))
}

/// Weighted target other than `me`; a few redraws, then give up.
fn pick(rng: &mut Pcg32, targets: Option<&WeightedIndex<f64>>, present: &[usize], me: usize) -> Option<usize> {
    let w = targets?;
    for _ in 0..8 {
        let t = present[w.sample(rng)];
        if t != me {
            return Some(t);
        }
    }
    None
}
