use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rolecycle_core::classify::write_assignments_csv;
use rolecycle_core::config::ThresholdConfig;
use rolecycle_core::event::EventKind;
use rolecycle_core::lifecycle::{project_trajectory, MatrixKind};
use rolecycle_core::pipeline::SnapshotPlan;
use rolecycle_core::steering::recommend;
use rolecycle_core::synth::{generate, BehaviorProfile};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::files::{self, DistributionFile};
use crate::session::{estimate_or_none, sequences_from_rows, violation_report, Session, SessionOptions};

const DAY: i64 = 86_400;

#[derive(Debug, Parser)]
#[command(name = "rolecycle", version, about = "Community membership life-cycle analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an event log and print member and event counts.
    Ingest(IngestArgs),
    /// Classify members per snapshot; writes assignments.csv and distribution.json.
    Classify(ClassifyArgs),
    /// Estimate transition matrices and validate role sequences.
    Transitions(TransitionsArgs),
    /// Project a distribution forward through a masked matrix.
    Project(ProjectArgs),
    /// Rank intervention plans against a target distribution.
    Steer(SteerArgs),
    /// Generate a synthetic community with ground truth.
    Synth(SynthArgs),
    /// Serve the analysis of one log over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub events: PathBuf,
    /// Also write the validated log, time ordered.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Threshold config (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Snapshot width in days.
    #[arg(long, default_value_t = 14)]
    pub window: u32,
    /// Distance between snapshot starts in days.
    #[arg(long, default_value_t = 14)]
    pub step: u32,
    /// Start of the first snapshot in epoch seconds.
    #[arg(long)]
    pub origin: Option<i64>,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 1)]
    pub min_dwell: usize,
}

impl AnalysisArgs {
    pub fn options(&self) -> Result<SessionOptions, CliError> {
        if self.window == 0 || self.step == 0 {
            return Err(CliError::Usage("--window and --step must be at least 1 day".into()));
        }
        let mut plan = SnapshotPlan::new(i64::from(self.window) * DAY, i64::from(self.step) * DAY);
        if let Some(o) = self.origin {
            plan = plan.with_origin(o);
        }
        Ok(SessionOptions {
            plan,
            smoothing: self.smoothing,
            min_dwell: self.min_dwell,
        })
    }

    pub fn config(&self) -> Result<ThresholdConfig, CliError> {
        let cfg = match &self.config {
            Some(p) => files::read_structured::<ThresholdConfig>(p)?,
            None => ThresholdConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn session(&self) -> Result<Session, CliError> {
        let log = files::read_events(&self.events)?;
        Session::build(&log, self.config()?, self.options()?)
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransitionsArgs {
    /// Assignments CSV written by `classify`.
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 1)]
    pub min_dwell: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Role-to-share JSON, or the distribution.json of `classify`.
    #[arg(long)]
    pub distribution: PathBuf,
    #[arg(long)]
    pub steps: usize,
    /// Mask a raw matrix before projecting.
    #[arg(long)]
    pub mask: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SteerArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long, default_value_t = 2)]
    pub max_plan_len: usize,
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub distribution: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Behaviour profile (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub members: usize,
    #[arg(long)]
    pub days: u32,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Event log to analyse.
    #[arg(long, env = "ROLECYCLE_DATA")]
    pub events: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 14)]
    pub window: u32,
    #[arg(long, default_value_t = 14)]
    pub step: u32,
    #[arg(long)]
    pub origin: Option<i64>,
    #[arg(long, env = "ROLECYCLE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}

impl ServeArgs {
    pub fn analysis(&self) -> AnalysisArgs {
        AnalysisArgs {
            events: self.events.clone(),
            config: self.config.clone(),
            window: self.window,
            step: self.step,
            origin: self.origin,
            smoothing: 0.0,
            min_dwell: 1,
        }
    }
}

fn emit(out: Option<&Path>, value: &Value) -> Result<Value, CliError> {
    if let Some(p) = out {
        files::write_json(p, value)?;
    }
    Ok(value.clone())
}

pub fn ingest(args: &IngestArgs) -> Result<Value, CliError> {
    let log = files::read_events(&args.events)?;
    if let Some(out) = &args.out {
        let mut w = files::create(out)?;
        log.write_jsonl(&mut w).map_err(|e| CliError::io(out, e))?;
    }
    let signed_up = log.members().values().filter(|m| m.signup.is_some()).count();
    let mut kinds = serde_json::Map::new();
    for e in log.events() {
        let k = serde_json::to_value(e.kind).expect("kind serializes");
        let key = k.as_str().unwrap_or_default().to_string();
        let n = kinds.get(&key).and_then(Value::as_u64).unwrap_or(0);
        kinds.insert(key, json!(n + 1));
    }
    let departures = log.events().iter().filter(|e| e.kind == EventKind::Departure).count();
    Ok(json!({
        "members": log.members().len(),
        "events": log.len(),
        "signed_up": signed_up,
        "departures": departures,
        "first_timestamp": log.first_timestamp(),
        "last_timestamp": log.last_timestamp(),
        "events_by_kind": kinds,
    }))
}

pub fn classify(args: &ClassifyArgs) -> Result<Value, CliError> {
    let session = args.analysis.session()?;
    files::ensure_dir(&args.out)?;
    let config = args.out.join("config.json");
    files::write_json(&config, &session.config)?;
    let assignments = args.out.join("assignments.csv");
    files::write_csv_with(&assignments, |w| write_assignments_csv(w, session.assignments()))?;
    let dist = DistributionFile {
        snapshots: session.snapshot_distributions(),
        current: session.current().map(|(_, d)| d),
    };
    let dist_path = args.out.join("distribution.json");
    files::write_json(&dist_path, &dist)?;
    Ok(json!({
        "snapshots": session.snapshots.len(),
        "assignments": session.assignments().count(),
        "members": session.members,
        "current": dist.current,
        "defined": dist.current.is_some(),
        "files": [assignments, dist_path, config],
    }))
}

pub fn transitions(args: &TransitionsArgs) -> Result<Value, CliError> {
    let rows = files::read_assignments(&args.assignments)?;
    let sequences = sequences_from_rows(&rows);
    let seqs: Vec<&Vec<_>> = sequences.values().collect();
    let estimate = estimate_or_none(&seqs, args.smoothing)?.ok_or(rolecycle_core::lifecycle::LifecycleError::NoObservations)?;
    let violations = violation_report(&sequences, args.min_dwell);
    files::ensure_dir(&args.out)?;
    let raw = args.out.join("matrix_raw.csv");
    let masked = args.out.join("matrix_masked.csv");
    let report = args.out.join("violations.json");
    files::write_csv_with(&raw, |w| estimate.raw.write_csv(w))?;
    files::write_csv_with(&masked, |w| estimate.masked.write_csv(w))?;
    let total: usize = violations.iter().map(|m| m.violations.len()).sum();
    let warnings: usize = violations
        .iter()
        .flat_map(|m| &m.violations)
        .filter(|v| v.is_warning())
        .count();
    files::write_json(&report, &json!({ "total": total, "warnings": warnings, "members": violations }))?;
    Ok(json!({
        "members": sequences.len(),
        "pairs": estimate.counts.iter().flatten().sum::<u64>(),
        "disallowed_mass": estimate.raw.disallowed_mass(),
        "violations": total,
        "warnings": warnings,
        "files": [raw, masked, report],
    }))
}

fn load_masked(path: &Path, mask: bool) -> Result<rolecycle_core::lifecycle::TransitionMatrix, CliError> {
    let m = files::read_matrix(path)?;
    match (m.kind(), mask) {
        (MatrixKind::GraphMasked, _) => Ok(m),
        (MatrixKind::EmpiricalRaw, true) => Ok(m.mask()),
        (MatrixKind::EmpiricalRaw, false) => Err(CliError::parse(
            path,
            "matrix has mass on disallowed transitions; pass --mask or use the masked matrix",
        )),
    }
}

pub fn project(args: &ProjectArgs) -> Result<Value, CliError> {
    let m = load_masked(&args.matrix, args.mask)?;
    let d = files::read_distribution(&args.distribution)?;
    let trajectory = project_trajectory(&d, &m, args.steps)?;
    emit(args.out.as_deref(), &json!({ "steps": args.steps, "trajectory": trajectory }))
}

pub fn steer(args: &SteerArgs) -> Result<Value, CliError> {
    let m = load_masked(&args.matrix, false)?;
    let d = files::read_distribution(&args.distribution)?;
    let target = files::read_target(&args.target)?;
    let catalog = files::read_catalog(&args.catalog)?;
    let rec = recommend(&d, &m, &target, &catalog, args.horizon, args.max_plan_len)?;
    let value = serde_json::to_value(&rec).expect("recommendation serializes");
    emit(args.out.as_deref(), &value)
}

pub fn synth(args: &SynthArgs) -> Result<Value, CliError> {
    let profile = match &args.profile {
        Some(p) => files::read_structured::<BehaviorProfile>(p)?,
        None => BehaviorProfile::default(),
    };
    let (log, truth) = generate(&profile, args.members, args.days, args.seed)?;
    files::ensure_dir(&args.out)?;
    let events = args.out.join("events.jsonl");
    let gt = args.out.join("ground_truth.csv");
    let mut w = files::create(&events)?;
    log.write_jsonl(&mut w).map_err(|e| CliError::io(&events, e))?;
    std::io::Write::flush(&mut w).map_err(|e| CliError::io(&events, e))?;
    files::write_csv_with(&gt, |w| truth.write_csv(w))?;
    Ok(json!({
        "members": truth.members.len(),
        "events": log.len(),
        "snapshots": truth.snapshot_count,
        "snapshot_days": profile.snapshot_days,
        "start_timestamp": profile.start_timestamp,
        "files": [events, gt],
    }))
}
