//! Reading and writing the artifacts exchanged between subcommands.
//!
//! Structured inputs are TOML when the file name ends in `.toml` and JSON
//! otherwise.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rolecycle_core::classify::{read_assignments_csv, AssignmentRow};
use rolecycle_core::event::{parse_events, EventLog};
use rolecycle_core::lifecycle::TransitionMatrix;
use rolecycle_core::role::{DistributionVector, Role};
use rolecycle_core::steering::{InterventionSpec, TargetDistribution};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

/// Deserializes a TOML or JSON file.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    if is_toml(path) {
        toml::from_str(&text).map_err(|e| CliError::parse(path, e))
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
    }
}

pub fn read_events(path: &Path) -> Result<EventLog, CliError> {
    Ok(parse_events(BufReader::new(open(path)?))?)
}

pub fn read_matrix(path: &Path) -> Result<TransitionMatrix, CliError> {
    TransitionMatrix::read_csv(open(path)?).map_err(|e| CliError::parse(path, e))
}

pub fn read_assignments(path: &Path) -> Result<Vec<AssignmentRow>, CliError> {
    read_assignments_csv(open(path)?).map_err(|e| CliError::parse(path, e))
}

/// Output of `classify` for one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDistribution {
    pub snapshot_index: usize,
    pub from: i64,
    pub to: i64,
    pub members: usize,
    /// `null` when the snapshot has no members.
    pub distribution: Option<DistributionVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFile {
    pub snapshots: Vec<SnapshotDistribution>,
    /// Latest defined distribution; `null` when none is defined.
    pub current: Option<DistributionVector>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistributionInput {
    File(DistributionFile),
    Plain(DistributionVector),
}

/// Accepts a plain role-to-share object or a `classify` distribution file.
pub fn read_distribution(path: &Path) -> Result<DistributionVector, CliError> {
    let text = read_text(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    let parsed = if raw.get("snapshots").is_some() {
        serde_json::from_value::<DistributionFile>(raw).map(DistributionInput::File)
    } else {
        serde_json::from_value::<DistributionVector>(raw).map(DistributionInput::Plain)
    };
    match parsed.map_err(|e| CliError::parse(path, e))? {
        DistributionInput::Plain(d) => Ok(d),
        DistributionInput::File(f) => f
            .current
            .ok_or_else(|| CliError::parse(path, "the distribution is undefined (no classified members)")),
    }
}

pub fn read_target(path: &Path) -> Result<TargetDistribution, CliError> {
    read_structured(path)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CatalogInput {
    List(Vec<InterventionSpec>),
    Table { interventions: Vec<InterventionSpec> },
}

/// A JSON array of interventions or a table with an `interventions` list.
pub fn read_catalog(path: &Path) -> Result<Vec<InterventionSpec>, CliError> {
    Ok(match read_structured::<CatalogInput>(path)? {
        CatalogInput::List(v) => v,
        CatalogInput::Table { interventions } => interventions,
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::parse(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Writes with a CSV writer function from the core crate.
pub fn write_csv_with<E: std::fmt::Display>(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| CliError::parse(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Role table helper for JSON payloads.
pub fn matrix_table(m: &TransitionMatrix) -> BTreeMap<Role, BTreeMap<Role, f64>> {
    Role::ALL
        .iter()
        .map(|&from| (from, Role::ALL.iter().map(|&to| (to, m.get(from, to))).collect()))
        .collect()
}
