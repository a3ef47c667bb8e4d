//! Event ingestion: the JSONL wire format, validation and the sealed event log.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type Timestamp = i64;

/// Largest timestamp; `window(log, 0, END_OF_TIME)` is the identity window.
pub const END_OF_TIME: Timestamp = Timestamp::MAX;

/// Opaque account identifier. A re-signup under a new account is a new id.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemberId(Arc<str>);

impl MemberId {
    pub fn new(id: impl AsRef<str>) -> Option<MemberId> {
        let id = id.as_ref();
        if id.is_empty() {
            None
        } else {
            Some(MemberId(Arc::from(id)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for MemberId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for MemberId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MemberId::new(s).ok_or_else(|| serde::de::Error::custom("member id must be non-empty"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Signup,
    Login,
    Post,
    Reply,
    EdgeAdd,
    EdgeRemove,
    Reaction,
    ModerationFlag,
    Departure,
}

impl EventKind {
    pub fn requires_target(self) -> bool {
        matches!(
            self,
            EventKind::EdgeAdd | EventKind::EdgeRemove | EventKind::Reply | EventKind::Reaction
        )
    }

    /// Kinds that may not occur before the member's signup.
    pub fn requires_account(self) -> bool {
        matches!(
            self,
            EventKind::Login | EventKind::Post | EventKind::Reply | EventKind::EdgeAdd
        )
    }

    pub fn carries_payload(self) -> bool {
        matches!(self, EventKind::Post | EventKind::Reply)
    }

    /// Actions performed by the member themselves (moderation flags and
    /// departures are recorded about the member).
    pub fn is_activity(self) -> bool {
        !matches!(
            self,
            EventKind::Signup | EventKind::ModerationFlag | EventKind::Departure
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub member: MemberId,
    pub kind: EventKind,
    pub timestamp: Timestamp,
    pub target: Option<MemberId>,
    pub payload_size: Option<u64>,
}

impl EventRecord {
    pub fn new(member: MemberId, kind: EventKind, timestamp: Timestamp) -> Self {
        EventRecord {
            member,
            kind,
            timestamp,
            target: None,
            payload_size: None,
        }
    }

    pub fn with_target(mut self, target: MemberId) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_payload(mut self, size: u64) -> Self {
        self.payload_size = Some(size);
        self
    }

    fn check(&self) -> Result<(), String> {
        if self.timestamp < 0 {
            return Err(format!("negative timestamp {}", self.timestamp));
        }
        match (&self.target, self.kind.requires_target()) {
            (None, true) => return Err(format!("{:?} requires a target", self.kind)),
            (Some(_), false) => return Err(format!("{:?} does not take a target", self.kind)),
            _ => {}
        }
        if matches!(self.kind, EventKind::EdgeAdd | EventKind::EdgeRemove)
            && self.target.as_ref() == Some(&self.member)
        {
            return Err("edge event targets its own member".to_string());
        }
        if self.payload_size.is_some() && !self.kind.carries_payload() {
            return Err(format!("{:?} does not take a payload_size", self.kind));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    member: String,
    kind: EventKind,
    timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload_size: Option<i64>,
}

impl WireRecord {
    fn into_record(self) -> Result<EventRecord, String> {
        let member = MemberId::new(&self.member).ok_or("empty member id")?;
        let target = match self.target {
            Some(t) => Some(MemberId::new(&t).ok_or("empty target id")?),
            None => None,
        };
        let payload_size = match self.payload_size {
            Some(p) if p < 0 => return Err(format!("negative payload_size {p}")),
            Some(p) => Some(p as u64),
            None => None,
        };
        Ok(EventRecord {
            member,
            kind: self.kind,
            timestamp: self.timestamp,
            target,
            payload_size,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: second Signup for member {member}")]
    OrderingConflict { line: usize, member: MemberId },
    #[error("line {line}: timestamp {timestamp} is before the epoch")]
    ClockSkew { line: usize, timestamp: i64 },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid window: from {from} is after to {to}")]
pub struct InvalidWindow {
    pub from: Timestamp,
    pub to: Timestamp,
}

/// Half-open time interval `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub from: Timestamp,
    pub to: Timestamp,
}

impl Window {
    pub fn new(from: Timestamp, to: Timestamp) -> Result<Window, InvalidWindow> {
        if from > to {
            Err(InvalidWindow { from, to })
        } else {
            Ok(Window { from, to })
        }
    }

    pub fn all() -> Window {
        Window {
            from: 0,
            to: END_OF_TIME,
        }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.from <= t && t < self.to
    }

    pub fn len(&self) -> i64 {
        self.to.saturating_sub(self.from)
    }

    pub fn is_empty(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemberInfo {
    pub signup: Option<Timestamp>,
}

/// Sealed, time-ordered event log.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    events: Vec<EventRecord>,
    members: BTreeMap<MemberId, MemberInfo>,
}

impl EventLog {
    /// Validates and seals records. Ties in timestamp keep the given order;
    /// error line numbers are 1-based positions in `records`.
    pub fn from_records(records: Vec<EventRecord>) -> Result<EventLog, IngestError> {
        let lines: Vec<usize> = (1..=records.len()).collect();
        Self::seal(records, lines)
    }

    fn seal(records: Vec<EventRecord>, lines: Vec<usize>) -> Result<EventLog, IngestError> {
        for (rec, &line) in records.iter().zip(&lines) {
            if rec.timestamp < 0 {
                return Err(IngestError::ClockSkew {
                    line,
                    timestamp: rec.timestamp,
                });
            }
            rec.check()
                .map_err(|reason| IngestError::MalformedRecord { line, reason })?;
        }

        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by_key(|&i| records[i].timestamp);

        // Signup timestamps first, so precedence can be checked in one pass.
        let mut members: BTreeMap<MemberId, MemberInfo> = BTreeMap::new();
        let mut signup_pos: BTreeMap<&MemberId, usize> = BTreeMap::new();
        for (pos, &i) in order.iter().enumerate() {
            let rec = &records[i];
            if rec.kind == EventKind::Signup {
                match members.entry(rec.member.clone()) {
                    Entry::Occupied(e) if e.get().signup.is_some() => {
                        return Err(IngestError::OrderingConflict {
                            line: lines[i],
                            member: rec.member.clone(),
                        });
                    }
                    e => {
                        e.or_default().signup = Some(rec.timestamp);
                    }
                }
                signup_pos.insert(&rec.member, pos);
            }
        }
        for (pos, &i) in order.iter().enumerate() {
            let rec = &records[i];
            if rec.kind.requires_account() {
                if let Some(&sp) = signup_pos.get(&rec.member) {
                    if pos < sp {
                        return Err(IngestError::MalformedRecord {
                            line: lines[i],
                            reason: format!(
                                "{:?} by {} precedes their Signup",
                                rec.kind, rec.member
                            ),
                        });
                    }
                }
            }
            members.entry(rec.member.clone()).or_default();
            if let Some(t) = &rec.target {
                members.entry(t.clone()).or_default();
            }
        }
        drop(signup_pos);

        let mut slots: Vec<Option<EventRecord>> = records.into_iter().map(Some).collect();
        let events = order
            .into_iter()
            .map(|i| slots[i].take().expect("each index once"))
            .collect();
        Ok(EventLog { events, members })
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn members(&self) -> &BTreeMap<MemberId, MemberInfo> {
        &self.members
    }

    pub fn member(&self, id: &MemberId) -> Option<&MemberInfo> {
        self.members.get(id)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<Timestamp> {
        self.events.first().map(|e| e.timestamp)
    }

    pub fn last_timestamp(&self) -> Option<Timestamp> {
        self.events.last().map(|e| e.timestamp)
    }

    /// Borrowed slice of the events inside `window`.
    pub fn events_in(&self, window: Window) -> &[EventRecord] {
        let lo = self.events.partition_point(|e| e.timestamp < window.from);
        let hi = self.events.partition_point(|e| e.timestamp < window.to);
        &self.events[lo..hi.max(lo)]
    }

    /// Sub-log with `from <= timestamp < to`. Members are those appearing in
    /// the retained events; their signup timestamps come from the full log.
    pub fn window(&self, from: Timestamp, to: Timestamp) -> Result<EventLog, InvalidWindow> {
        let w = Window::new(from, to)?;
        let events: Vec<EventRecord> = self.events_in(w).to_vec();
        let mut members = BTreeMap::new();
        for e in &events {
            for id in std::iter::once(&e.member).chain(e.target.as_ref()) {
                if !members.contains_key(id) {
                    members.insert(id.clone(), self.members[id]);
                }
            }
        }
        Ok(EventLog { events, members })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            let wire = WireRecord {
                member: e.member.to_string(),
                kind: e.kind,
                timestamp: e.timestamp,
                target: e.target.as_ref().map(|t| t.to_string()),
                payload_size: e.payload_size.map(|p| p as i64),
            };
            serde_json::to_writer(&mut out, &wire)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Parses a JSONL event stream into a sealed log. Blank lines are skipped.
pub fn parse_events<R: BufRead>(source: R) -> Result<EventLog, IngestError> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        if wire.timestamp < 0 {
            return Err(IngestError::ClockSkew {
                line: line_no,
                timestamp: wire.timestamp,
            });
        }
        let rec = wire
            .into_record()
            .map_err(|reason| IngestError::MalformedRecord {
                line: line_no,
                reason,
            })?;
        records.push(rec);
        lines.push(line_no);
    }
    EventLog::seal(records, lines)
}

pub fn parse_events_str(source: &str) -> Result<EventLog, IngestError> {
    parse_events(source.as_bytes())
}
