//! Per-member activity measures and their normalisation against the
//! community level.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::event::{EventKind, EventLog, EventRecord, MemberId, Timestamp, Window};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Default burst sub-window width as a fraction of the analysis window.
pub const DEFAULT_BURST_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActivityError {
    #[error("unknown member {0}")]
    UnknownMember(MemberId),
    #[error("burst fraction {0} must lie in (0, 1]")]
    InvalidBurstFraction(f64),
}

/// Time since the member's most recent login.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoginRecency {
    Never,
    Seconds(f64),
}

impl LoginRecency {
    pub fn seconds(self) -> Option<f64> {
        match self {
            LoginRecency::Never => None,
            LoginRecency::Seconds(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityMeasures {
    /// `None` for members without a signup.
    pub days_since_signup: Option<f64>,
    /// Measured against logins before the window end, including those earlier
    /// than the window start.
    pub time_since_last_login: LoginRecency,
    /// `None` with fewer than two logins in the window.
    pub mean_inter_login_gap: Option<f64>,
    /// Posts and replies in the window.
    pub post_count: u64,
    /// Share of window activity inside the busiest sub-window; `None` with
    /// no activity.
    pub burstiness: Option<f64>,
    pub flags_received: u64,
}

/// Largest number of sorted timestamps inside any half-open interval of
/// `width` seconds.
fn busiest_interval(times: &[Timestamp], width: i64) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..times.len() {
        while times[hi] - times[lo] >= width {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

pub fn burst_width(window: Window, fraction: f64) -> i64 {
    ((window.len() as f64 * fraction).round() as i64).max(1)
}

/// Shared computation: `events` are the member's own events inside `window`
/// in time order; `last_login` is their latest login before `window.to`.
pub(crate) fn measures_from_events<'a>(
    events: impl IntoIterator<Item = &'a EventRecord>,
    signup: Option<Timestamp>,
    last_login: Option<Timestamp>,
    window: Window,
    now: Timestamp,
    burst_fraction: f64,
) -> ActivityMeasures {
    let mut logins = Vec::new();
    let mut activity = Vec::new();
    let mut post_count = 0;
    let mut flags_received = 0;
    for e in events {
        match e.kind {
            EventKind::Login => logins.push(e.timestamp),
            EventKind::Post | EventKind::Reply => post_count += 1,
            EventKind::ModerationFlag => flags_received += 1,
            _ => {}
        }
        if e.kind.is_activity() {
            activity.push(e.timestamp);
        }
    }
    let mean_inter_login_gap = (logins.len() >= 2).then(|| {
        let span = logins[logins.len() - 1] - logins[0];
        span as f64 / (logins.len() - 1) as f64
    });
    let burstiness = (!activity.is_empty()).then(|| {
        let width = burst_width(window, burst_fraction);
        busiest_interval(&activity, width) as f64 / activity.len() as f64
    });
    let time_since_last_login = match last_login {
        Some(t) => LoginRecency::Seconds((now - t).max(0) as f64),
        None => LoginRecency::Never,
    };
    ActivityMeasures {
        days_since_signup: signup.map(|s| (now - s).max(0) as f64 / SECONDS_PER_DAY),
        time_since_last_login,
        mean_inter_login_gap,
        post_count,
        burstiness,
        flags_received,
    }
}

/// Activity of one member over `window`, evaluated at time `now`.
pub fn compute_activity(
    log: &EventLog,
    member: &MemberId,
    window: Window,
    now: Timestamp,
    burst_fraction: f64,
) -> Result<ActivityMeasures, ActivityError> {
    if !(burst_fraction > 0.0 && burst_fraction <= 1.0) {
        return Err(ActivityError::InvalidBurstFraction(burst_fraction));
    }
    let info = log
        .member(member)
        .ok_or_else(|| ActivityError::UnknownMember(member.clone()))?;
    let horizon = window.to.min(now.saturating_add(1));
    let last_login = log
        .events()
        .iter()
        .take_while(|e| e.timestamp < horizon)
        .filter(|e| e.kind == EventKind::Login && e.member == *member)
        .map(|e| e.timestamp)
        .last();
    let own = log.events_in(window).iter().filter(|e| e.member == *member);
    Ok(measures_from_events(
        own,
        info.signup,
        last_login,
        window,
        now,
        burst_fraction,
    ))
}

/// Position of one value relative to the community.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Relative {
    /// Midpoint-rank percentile; `None` for undefined raw values.
    pub percentile: Option<f64>,
    /// `None` for undefined raw values or a zero community mean.
    pub ratio_to_mean: Option<f64>,
}

/// Reference distribution of one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    sorted: Vec<f64>,
    mean: f64,
}

impl Baseline {
    /// `None` when no defined values are given.
    pub fn new(values: impl IntoIterator<Item = f64>) -> Option<Baseline> {
        let mut sorted: Vec<f64> = values.into_iter().collect();
        if sorted.is_empty() {
            return None;
        }
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        Some(Baseline { sorted, mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn percentile(&self, value: f64) -> f64 {
        let less = self.sorted.partition_point(|&v| v < value);
        let not_greater = self.sorted.partition_point(|&v| v <= value);
        (less as f64 + 0.5 * (not_greater - less) as f64) / self.sorted.len() as f64
    }

    pub fn relative(&self, value: Option<f64>) -> Relative {
        match value {
            None => Relative::default(),
            Some(v) => Relative {
                percentile: Some(self.percentile(v)),
                ratio_to_mean: (self.mean != 0.0).then(|| v / self.mean),
            },
        }
    }
}

pub fn relativize_with(baseline: Option<&Baseline>, value: Option<f64>) -> Relative {
    baseline.map(|b| b.relative(value)).unwrap_or_default()
}

/// Relative position of every member's value within the population of
/// defined values.
pub fn relativize_values(values: &BTreeMap<MemberId, Option<f64>>) -> BTreeMap<MemberId, Relative> {
    let baseline = Baseline::new(values.values().flatten().copied());
    values
        .iter()
        .map(|(id, v)| (id.clone(), relativize_with(baseline.as_ref(), *v)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeMeasures {
    pub days_since_signup: Relative,
    pub time_since_last_login: Relative,
    pub mean_inter_login_gap: Relative,
    pub post_count: Relative,
    pub burstiness: Relative,
    pub flags_received: Relative,
}

type Extract = fn(&ActivityMeasures) -> Option<f64>;

const EXTRACTORS: [Extract; 6] = [
    |m| m.days_since_signup,
    |m| m.time_since_last_login.seconds(),
    |m| m.mean_inter_login_gap,
    |m| Some(m.post_count as f64),
    |m| m.burstiness,
    |m| Some(m.flags_received as f64),
];

/// Community level of each activity measure, built from a reference
/// population and applicable to any member.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityBaseline([Option<Baseline>; 6]);

impl ActivityBaseline {
    pub fn new<'a>(population: impl IntoIterator<Item = &'a ActivityMeasures> + Clone) -> Self {
        ActivityBaseline(EXTRACTORS.map(|f| Baseline::new(population.clone().into_iter().filter_map(f))))
    }

    pub fn mean_gap(&self) -> Option<f64> {
        self.0[2].as_ref().map(Baseline::mean)
    }

    pub fn relative(&self, m: &ActivityMeasures) -> RelativeMeasures {
        let r: Vec<Relative> = EXTRACTORS
            .iter()
            .zip(&self.0)
            .map(|(f, b)| relativize_with(b.as_ref(), f(m)))
            .collect();
        RelativeMeasures {
            days_since_signup: r[0],
            time_since_last_login: r[1],
            mean_inter_login_gap: r[2],
            post_count: r[3],
            burstiness: r[4],
            flags_received: r[5],
        }
    }
}

/// Relative measures of every member against the whole given population.
pub fn relativize(all: &BTreeMap<MemberId, ActivityMeasures>) -> BTreeMap<MemberId, RelativeMeasures> {
    let baseline = ActivityBaseline::new(all.values());
    all.iter()
        .map(|(id, m)| (id.clone(), baseline.relative(m)))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV of raw measures followed by percentile/ratio columns. Undefined
/// values are empty cells; a member who never logged in has `never`.
pub fn write_activity_csv<W: io::Write>(
    out: W,
    measures: &BTreeMap<MemberId, ActivityMeasures>,
    relatives: &BTreeMap<MemberId, RelativeMeasures>,
) -> csv::Result<()> {
    const NAMES: [&str; 6] = [
        "days_since_signup",
        "time_since_last_login",
        "mean_inter_login_gap",
        "post_count",
        "burstiness",
        "flags_received",
    ];
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["member".to_string()];
    header.extend(NAMES.iter().map(|n| n.to_string()));
    for n in NAMES {
        header.push(format!("{n}_percentile"));
        header.push(format!("{n}_ratio_to_mean"));
    }
    w.write_record(&header)?;
    for (id, m) in measures {
        let mut row = vec![
            id.to_string(),
            opt(m.days_since_signup),
            match m.time_since_last_login {
                LoginRecency::Never => "never".to_string(),
                LoginRecency::Seconds(s) => s.to_string(),
            },
            opt(m.mean_inter_login_gap),
            m.post_count.to_string(),
            opt(m.burstiness),
            m.flags_received.to_string(),
        ];
        let r = relatives.get(id).copied().unwrap_or_default();
        for rel in [
            r.days_since_signup,
            r.time_since_last_login,
            r.mean_inter_login_gap,
            r.post_count,
            r.burstiness,
            r.flags_received,
        ] {
            row.push(opt(rel.percentile));
            row.push(opt(rel.ratio_to_mean));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
