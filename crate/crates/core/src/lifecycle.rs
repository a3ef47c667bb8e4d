//! Role transition graph, transition matrices and distribution projection.

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::role::{DistributionVector, Role};

/// Row-sum tolerance of a stochastic matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

const fn successors(from: Role) -> &'static [Role] {
    use Role::*;
    match from {
        Visitor => &[Visitor, Novice, Departed],
        Novice => &[Novice, Active, Passive, Troll, Departed],
        Active => &[Active, Passive, Leader, Troll, Departed],
        Leader => &[Leader, Active, Passive, Troll, Departed],
        Passive => &[Passive, Active, Departed],
        Troll => &[Troll, Departed],
        Departed => &[Departed],
    }
}

pub fn allowed_successors(from: Role) -> &'static [Role] {
    successors(from)
}

pub fn is_valid_transition(from: Role, to: Role) -> bool {
    successors(from).contains(&to)
}

/// Allowed transitions that validation still reports.
pub fn is_unusual_transition(from: Role, to: Role) -> bool {
    matches!((from, to), (Role::Active, Role::Departed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    /// The pair is not in the transition graph.
    Disallowed { index: usize, from: Role, to: Role },
    /// A role change after fewer than `min_dwell` snapshots in `from`.
    ShortDwell {
        index: usize,
        from: Role,
        to: Role,
        dwell: usize,
        min_dwell: usize,
    },
    /// Allowed but not expected.
    Unusual { index: usize, from: Role, to: Role },
}

impl Violation {
    /// Position of the later element of the offending pair.
    pub fn index(&self) -> usize {
        match *self {
            Violation::Disallowed { index, .. }
            | Violation::ShortDwell { index, .. }
            | Violation::Unusual { index, .. } => index,
        }
    }

    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::Unusual { .. })
    }
}

/// Checks every adjacent pair. A `min_dwell` below 1 is treated as 1. The
/// first run of a sequence has unknown length and never counts as short.
pub fn validate_sequence(series: &[Role], min_dwell: usize) -> Vec<Violation> {
    let min_dwell = min_dwell.max(1);
    let mut out = Vec::new();
    let mut dwell = 1;
    let mut first_run = true;
    for (i, pair) in series.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        let index = i + 1;
        if from == to {
            dwell += 1;
            continue;
        }
        if !is_valid_transition(from, to) {
            out.push(Violation::Disallowed { index, from, to });
        } else if is_unusual_transition(from, to) {
            out.push(Violation::Unusual { index, from, to });
        }
        if !first_run && dwell < min_dwell {
            out.push(Violation::ShortDwell {
                index,
                from,
                to,
                dwell,
                min_dwell,
            });
        }
        dwell = 1;
        first_run = false;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    EmpiricalRaw,
    GraphMasked,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LifecycleError {
    #[error("no adjacent role pairs observed")]
    NoObservations,
    #[error("smoothing must be finite and non-negative, got {0}")]
    InvalidSmoothing(f64),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

pub type Rows = [[f64; Role::COUNT]; Role::COUNT];

/// Row-stochastic matrix over roles in their fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    rows: Rows,
    kind: MatrixKind,
}

fn identity() -> Rows {
    let mut rows = [[0.0; Role::COUNT]; Role::COUNT];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = 1.0;
    }
    rows
}

/// Scales a row to sum 1; a zero row becomes the self-loop row `i`.
pub(crate) fn normalize_row(row: &mut [f64; Role::COUNT], i: usize) {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        for x in row.iter_mut() {
            *x /= s;
        }
    } else {
        *row = [0.0; Role::COUNT];
        row[i] = 1.0;
    }
}

impl TransitionMatrix {
    pub fn identity() -> Self {
        TransitionMatrix {
            rows: identity(),
            kind: MatrixKind::GraphMasked,
        }
    }

    /// Validates entries, row sums and, for masked matrices, support.
    pub fn new(rows: Rows, kind: MatrixKind) -> Result<Self, LifecycleError> {
        for (i, row) in rows.iter().enumerate() {
            let from = Role::ALL[i];
            for (j, &x) in row.iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(LifecycleError::InvalidMatrix(format!("entry {from}->{} = {x}", Role::ALL[j])));
                }
                if kind == MatrixKind::GraphMasked && x != 0.0 && !is_valid_transition(from, Role::ALL[j]) {
                    return Err(LifecycleError::InvalidMatrix(format!(
                        "disallowed transition {from}->{} has mass {x}",
                        Role::ALL[j]
                    )));
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(LifecycleError::InvalidMatrix(format!("row {from} sums to {s}")));
            }
        }
        Ok(TransitionMatrix { rows, kind })
    }

    pub(crate) fn from_rows_unchecked(rows: Rows, kind: MatrixKind) -> Self {
        TransitionMatrix { rows, kind }
    }

    pub fn rows(&self) -> &Rows {
        &self.rows
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn get(&self, from: Role, to: Role) -> f64 {
        self.rows[from.index()][to.index()]
    }

    /// Total mass on disallowed cells.
    pub fn disallowed_mass(&self) -> f64 {
        let mut m = 0.0;
        for from in Role::ALL {
            for to in Role::ALL {
                if !is_valid_transition(from, to) {
                    m += self.get(from, to);
                }
            }
        }
        m
    }

    /// Zeroes disallowed cells and renormalizes the rows that changed. Rows
    /// left empty become self-loops.
    pub fn mask(&self) -> TransitionMatrix {
        let mut rows = self.rows;
        for (i, row) in rows.iter_mut().enumerate() {
            let from = Role::ALL[i];
            let mut changed = false;
            for (j, x) in row.iter_mut().enumerate() {
                if *x != 0.0 && !is_valid_transition(from, Role::ALL[j]) {
                    *x = 0.0;
                    changed = true;
                }
            }
            if changed {
                normalize_row(row, i);
            }
        }
        TransitionMatrix {
            rows,
            kind: MatrixKind::GraphMasked,
        }
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..Role::COUNT {
            for j in 0..Role::COUNT {
                m = m.max((self.rows[i][j] - other.rows[i][j]).abs());
            }
        }
        m
    }

    /// CSV with a header row and a leading column of role names.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["from".to_string()];
        header.extend(Role::ALL.iter().map(|r| r.to_string()));
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![Role::ALL[i].to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`TransitionMatrix::write_csv`]. Rows and
    /// columns may appear in any order but every role exactly once. The
    /// matrix is tagged masked when it has no disallowed mass.
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, LifecycleError> {
        let bad = |m: String| LifecycleError::InvalidMatrix(m);
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() != Role::COUNT + 1 {
            return Err(bad(format!("expected {} columns, found {}", Role::COUNT + 1, header.len())));
        }
        let cols: Vec<Role> = header
            .iter()
            .skip(1)
            .map(|h| h.trim().parse::<Role>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_, _>>()?;
        let mut rows = [[f64::NAN; Role::COUNT]; Role::COUNT];
        let mut seen = [false; Role::COUNT];
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let from: Role = rec
                .get(0)
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|e: crate::role::UnknownRole| bad(e.to_string()))?;
            if std::mem::replace(&mut seen[from.index()], true) {
                return Err(bad(format!("row {from} repeated")));
            }
            for (k, to) in cols.iter().enumerate() {
                let cell = rec.get(k + 1).unwrap_or_default().trim();
                rows[from.index()][to.index()] = cell.parse().map_err(|_| bad(format!("cell {from}->{to} = {cell:?}")))?;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("missing role rows".into()));
        }
        for to in Role::ALL {
            if !cols.contains(&to) {
                return Err(bad(format!("missing column {to}")));
            }
        }
        let raw = TransitionMatrix::new(rows, MatrixKind::EmpiricalRaw)?;
        Ok(if raw.disallowed_mass() == 0.0 {
            TransitionMatrix {
                kind: MatrixKind::GraphMasked,
                ..raw
            }
        } else {
            raw
        })
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows.iter().enumerate() {
            write!(f, "{:>9}", Role::ALL[i].name())?;
            for x in row {
                write!(f, " {x:6.3}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Adjacent-pair counts over all series.
pub fn count_transitions<S: AsRef<[Role]>>(series: &[S]) -> [[u64; Role::COUNT]; Role::COUNT] {
    let mut counts = [[0u64; Role::COUNT]; Role::COUNT];
    for s in series {
        for p in s.as_ref().windows(2) {
            counts[p[0].index()][p[1].index()] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub counts: [[u64; Role::COUNT]; Role::COUNT],
    pub raw: TransitionMatrix,
    pub masked: TransitionMatrix,
}

/// Row-normalized pair counts, with `smoothing` added to allowed cells.
pub fn estimate_transition_matrix<S: AsRef<[Role]>>(
    series: &[S],
    smoothing: f64,
) -> Result<TransitionEstimate, LifecycleError> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(LifecycleError::InvalidSmoothing(smoothing));
    }
    let counts = count_transitions(series);
    if counts.iter().flatten().all(|&c| c == 0) {
        return Err(LifecycleError::NoObservations);
    }
    let mut rows = [[0.0; Role::COUNT]; Role::COUNT];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = counts[i][j] as f64;
            if is_valid_transition(Role::ALL[i], Role::ALL[j]) {
                *x += smoothing;
            }
        }
        normalize_row(row, i);
    }
    let raw = TransitionMatrix::from_rows_unchecked(rows, MatrixKind::EmpiricalRaw);
    let masked = raw.mask();
    Ok(TransitionEstimate { counts, raw, masked })
}

fn step(d: &[f64; Role::COUNT], m: &Rows) -> [f64; Role::COUNT] {
    let mut out = [0.0; Role::COUNT];
    for (i, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        for (o, &mij) in out.iter_mut().zip(&m[i]) {
            *o += di * mij;
        }
    }
    out
}

fn check_projection_inputs(d: &DistributionVector, m: &TransitionMatrix) -> Result<(), LifecycleError> {
    if m.kind != MatrixKind::GraphMasked {
        return Err(LifecycleError::InvalidMatrix("projection needs a graph-masked matrix".into()));
    }
    TransitionMatrix::new(m.rows, MatrixKind::GraphMasked)?;
    DistributionVector::new(*d.as_array()).map_err(|e| LifecycleError::InvalidDistribution(e.to_string()))?;
    Ok(())
}

/// Distributions after 0..=k steps of `d · M`.
pub fn project_trajectory(
    d: &DistributionVector,
    m: &TransitionMatrix,
    k: usize,
) -> Result<Vec<DistributionVector>, LifecycleError> {
    check_projection_inputs(d, m)?;
    let mut cur = *d.as_array();
    let mut out = Vec::with_capacity(k + 1);
    out.push(*d);
    for _ in 0..k {
        cur = step(&cur, &m.rows);
        out.push(DistributionVector::from_raw(cur));
    }
    Ok(out)
}

/// `d · M^k`.
pub fn project_distribution(
    d: &DistributionVector,
    m: &TransitionMatrix,
    k: usize,
) -> Result<DistributionVector, LifecycleError> {
    check_projection_inputs(d, m)?;
    let mut cur = *d.as_array();
    for _ in 0..k {
        cur = step(&cur, &m.rows);
    }
    Ok(DistributionVector::from_raw(cur))
}

/// Whether `d` lies on the simplex within `tol`.
pub fn on_simplex(d: &DistributionVector, tol: f64) -> bool {
    d.as_array().iter().all(|&x| x >= -tol) && (d.sum() - 1.0).abs() <= tol
}
