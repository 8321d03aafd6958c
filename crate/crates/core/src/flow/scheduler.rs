//! Scheduler back ends: an in-memory simulator and script-only Slurm and
//! Torque templates, plus detection of which one to use.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::env;
use std::ffi::OsString;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::store::StatusStore;
use super::JobOperation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerStatus {
    Unknown,
    Queued,
    Active,
    Completed,
    Failed,
}

impl SchedulerStatus {
    /// Queued or active: submitting again would duplicate work.
    pub fn is_pending(self) -> bool {
        matches!(self, SchedulerStatus::Queued | SchedulerStatus::Active)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerStatus::Unknown => "unknown",
            SchedulerStatus::Queued => "queued",
            SchedulerStatus::Active => "active",
            SchedulerStatus::Completed => "completed",
            SchedulerStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for SchedulerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Directive table of a batch system. Each resource maps to a format
/// string in which `{}` is replaced by the requested value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dialect {
    pub name: &'static str,
    pub directive: &'static str,
    pub resources: &'static [(&'static str, &'static str)],
}

impl Dialect {
    pub fn resource_format(&self, key: &str) -> Option<&'static str> {
        self.resources.iter().find(|(k, _)| *k == key).map(|(_, f)| *f)
    }
}

pub const SLURM: Dialect = Dialect {
    name: "slurm",
    directive: "#SBATCH",
    resources: &[
        ("job_name", "--job-name={}"),
        ("partition", "--partition={}"),
        ("nodes", "--nodes={}"),
        ("ntasks", "--ntasks={}"),
        ("cpus_per_task", "--cpus-per-task={}"),
        ("memory", "--mem={}"),
        ("walltime", "--time={}"),
        ("output", "--output={}"),
    ],
};

pub const TORQUE: Dialect = Dialect {
    name: "torque",
    directive: "#PBS",
    resources: &[
        ("job_name", "-N {}"),
        ("queue", "-q {}"),
        ("nodes", "-l nodes={}"),
        ("memory", "-l mem={}"),
        ("walltime", "-l walltime={}"),
        ("output", "-o {}"),
    ],
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchedulerError {
    #[error("submission rejected: {0}")]
    Rejected(String),
    #[error("{0}")]
    Unsupported(String),
}

pub trait Scheduler {
    fn name(&self) -> &str;
    fn dialect(&self) -> &Dialect;
    /// Submits one script running `members`; returns the cluster job id.
    fn submit(&mut self, script: &str, members: &[JobOperation]) -> Result<String, SchedulerError>;
    fn status(&self, jo_id: &str) -> SchedulerStatus;
}

#[derive(Debug, Clone)]
struct SimJob {
    members: Vec<String>,
    status: SchedulerStatus,
    script: String,
}

/// In-memory scheduler whose queue advances only when told to.
///
/// Each [`SimulatedScheduler::step`] moves queued jobs to active and active
/// jobs to completed, or to failed for job-operations marked with
/// [`SimulatedScheduler::fail_on`].
#[derive(Debug, Clone)]
pub struct SimulatedScheduler {
    dialect: Dialect,
    next_id: u64,
    jobs: BTreeMap<u64, SimJob>,
    latest: HashMap<String, u64>,
    failing: HashSet<String>,
    accept_limit: Option<usize>,
}

impl Default for SimulatedScheduler {
    fn default() -> Self {
        Self::new()
    }
}

impl SimulatedScheduler {
    pub fn new() -> Self {
        Self::with_dialect(SLURM)
    }

    pub fn with_dialect(dialect: Dialect) -> Self {
        Self {
            dialect,
            next_id: 1,
            jobs: BTreeMap::new(),
            latest: HashMap::new(),
            failing: HashSet::new(),
            accept_limit: None,
        }
    }

    /// Rebuilds the queue from submissions recorded in a status store, so
    /// that a fresh process sees earlier submissions that are still
    /// pending.
    pub fn resume(store: &StatusStore) -> Self {
        let mut sim = Self::new();
        let mut by_cluster: BTreeMap<&str, (Vec<String>, SchedulerStatus)> = BTreeMap::new();
        for (jo_id, entry) in store.entries() {
            let slot = by_cluster
                .entry(entry.cluster_job_id.as_str())
                .or_insert_with(|| (Vec::new(), entry.last_status));
            slot.0.push(jo_id.clone());
        }
        for (cluster_id, (members, status)) in by_cluster {
            let n = cluster_id
                .strip_prefix("sim-")
                .and_then(|n| n.parse().ok())
                .unwrap_or(sim.next_id);
            for m in &members {
                sim.latest.insert(m.clone(), n);
            }
            sim.jobs.insert(
                n,
                SimJob {
                    members,
                    status,
                    script: String::new(),
                },
            );
            sim.next_id = sim.next_id.max(n + 1);
        }
        sim
    }

    /// Accept at most `n` more submissions, rejecting the rest.
    pub fn accept_at_most(&mut self, n: usize) {
        self.accept_limit = Some(n);
    }

    /// Job-operations that will end in `failed`.
    pub fn fail_on(&mut self, jo_id: impl Into<String>) {
        self.failing.insert(jo_id.into());
    }

    /// Advances every cluster job by one state.
    pub fn step(&mut self) {
        for job in self.jobs.values_mut() {
            job.status = match job.status {
                SchedulerStatus::Queued => SchedulerStatus::Active,
                SchedulerStatus::Active => {
                    if job.members.iter().any(|m| self.failing.contains(m)) {
                        SchedulerStatus::Failed
                    } else {
                        SchedulerStatus::Completed
                    }
                }
                s => s,
            };
        }
    }

    pub fn set_status(&mut self, cluster_id: &str, status: SchedulerStatus) -> bool {
        match Self::parse_cluster_id(cluster_id).and_then(|n| self.jobs.get_mut(&n)) {
            Some(job) => {
                job.status = status;
                true
            }
            None => false,
        }
    }

    pub fn cluster_status(&self, cluster_id: &str) -> SchedulerStatus {
        Self::parse_cluster_id(cluster_id)
            .and_then(|n| self.jobs.get(&n))
            .map_or(SchedulerStatus::Unknown, |j| j.status)
    }

    /// Scripts accepted so far, oldest first.
    pub fn scripts(&self) -> Vec<(String, &str)> {
        self.jobs
            .iter()
            .filter(|(_, j)| !j.script.is_empty())
            .map(|(n, j)| (format!("sim-{n}"), j.script.as_str()))
            .collect()
    }

    fn parse_cluster_id(id: &str) -> Option<u64> {
        id.strip_prefix("sim-")?.parse().ok()
    }
}

impl Scheduler for SimulatedScheduler {
    fn name(&self) -> &str {
        "simulated"
    }

    fn dialect(&self) -> &Dialect {
        &self.dialect
    }

    fn submit(&mut self, script: &str, members: &[JobOperation]) -> Result<String, SchedulerError> {
        if let Some(limit) = self.accept_limit.as_mut() {
            if *limit == 0 {
                return Err(SchedulerError::Rejected("simulated queue limit reached".into()));
            }
            *limit -= 1;
        }
        let n = self.next_id;
        self.next_id += 1;
        let members: Vec<String> = members.iter().map(JobOperation::id).collect();
        for m in &members {
            self.latest.insert(m.clone(), n);
        }
        self.jobs.insert(
            n,
            SimJob {
                members,
                status: SchedulerStatus::Queued,
                script: script.to_owned(),
            },
        );
        Ok(format!("sim-{n}"))
    }

    fn status(&self, jo_id: &str) -> SchedulerStatus {
        self.latest
            .get(jo_id)
            .and_then(|n| self.jobs.get(n))
            .map_or(SchedulerStatus::Unknown, |j| j.status)
    }
}

/// Script generation for a real batch system without talking to it.
#[derive(Debug, Clone)]
pub struct TemplateScheduler {
    dialect: Dialect,
}

impl TemplateScheduler {
    pub fn slurm() -> Self {
        Self { dialect: SLURM }
    }

    pub fn torque() -> Self {
        Self { dialect: TORQUE }
    }
}

impl Scheduler for TemplateScheduler {
    fn name(&self) -> &str {
        self.dialect.name
    }

    fn dialect(&self) -> &Dialect {
        &self.dialect
    }

    fn submit(&mut self, _script: &str, _members: &[JobOperation]) -> Result<String, SchedulerError> {
        Err(SchedulerError::Unsupported(format!(
            "the {} template only generates scripts; submit them with the cluster's own tools",
            self.dialect.name
        )))
    }

    fn status(&self, _jo_id: &str) -> SchedulerStatus {
        SchedulerStatus::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Simulated,
    Slurm,
    Torque,
}

impl SchedulerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Simulated => "simulated",
            SchedulerKind::Slurm => "slurm",
            SchedulerKind::Torque => "torque",
        }
    }

    pub fn build(self) -> Box<dyn Scheduler> {
        match self {
            SchedulerKind::Simulated => Box::new(SimulatedScheduler::new()),
            SchedulerKind::Slurm => Box::new(TemplateScheduler::slurm()),
            SchedulerKind::Torque => Box::new(TemplateScheduler::torque()),
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simulated" | "sim" => Ok(SchedulerKind::Simulated),
            "slurm" => Ok(SchedulerKind::Slurm),
            "torque" | "pbs" => Ok(SchedulerKind::Torque),
            other => Err(format!(
                "unknown scheduler {other:?} (expected simulated, slurm or torque)"
            )),
        }
    }
}

/// Ordered probe table consulted by [`detect_scheduler`].
#[derive(Debug, Clone)]
pub struct DetectionConfig {
    /// Wins over probing when it names a known scheduler.
    pub override_name: Option<String>,
    /// `(scheduler, binary that reveals it)`, first hit wins.
    pub probes: Vec<(SchedulerKind, String)>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            override_name: None,
            probes: vec![
                (SchedulerKind::Slurm, "sbatch".into()),
                (SchedulerKind::Torque, "qsub".into()),
            ],
        }
    }
}

/// Picks a scheduler: explicit override, else the first probe whose binary
/// `is_available`, else the simulator.
pub fn detect_scheduler(config: &DetectionConfig, is_available: impl Fn(&str) -> bool) -> SchedulerKind {
    if let Some(kind) = config.override_name.as_deref().and_then(|n| n.parse().ok()) {
        return kind;
    }
    config
        .probes
        .iter()
        .find(|(_, binary)| is_available(binary))
        .map_or(SchedulerKind::Simulated, |(kind, _)| *kind)
}

/// [`detect_scheduler`] probing the directories of `PATH`.
pub fn detect_scheduler_from_env(config: &DetectionConfig) -> SchedulerKind {
    let path = env::var_os("PATH").unwrap_or_default();
    detect_scheduler(config, |binary| on_path(&path, binary))
}

fn on_path(path: &OsString, binary: &str) -> bool {
    env::split_paths(path).any(|dir| is_executable(&dir.join(binary)))
}

fn is_executable(path: &Path) -> bool {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        path.metadata()
            .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
            .unwrap_or(false)
    }
    #[cfg(not(unix))]
    {
        path.is_file()
    }
}
