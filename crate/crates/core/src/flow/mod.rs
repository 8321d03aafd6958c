//! Condition-driven workflows over a project.
//!
//! An operation is eligible for a job when all of its pre-conditions hold
//! and at least one of its post-conditions does not. An operation without
//! post-conditions is never considered complete: it stays eligible
//! whenever its pre-conditions hold.

mod condition;
mod file;
mod run;
mod scheduler;
mod script;
mod store;
mod submit;
mod template;

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

pub use condition::{Condition, ConditionKind};
pub use file::{OperationSpec, WorkflowFile};
pub use run::{run, Execution, Outcome, RunOptions, RunReport};
pub use scheduler::{
    detect_scheduler, detect_scheduler_from_env, DetectionConfig, Dialect, Scheduler, SchedulerError, SchedulerKind,
    SchedulerStatus, SimulatedScheduler, TemplateScheduler, SLURM, TORQUE,
};
pub use script::{generate_script, Bundle, BundleMode, BundledOperation, Resources};
pub use store::{StatusStore, StoreEntry, STATUS_FILE};
pub use submit::{submit, Submission, SubmitOptions, SubmitReport};
pub use template::{render_cmd, validate_template};

use crate::document::DocumentError;
use crate::id::JobId;
use crate::project::{Job, Project, ProjectError};
use condition::JobContext;

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("operation {0:?} is defined twice")]
    DuplicateOperation(String),
    #[error("operation name must not be empty")]
    EmptyName,
    #[error("command {cmd:?}: placeholder {{{placeholder}}}: {reason}")]
    Template {
        cmd: String,
        placeholder: String,
        reason: String,
    },
    #[error("unknown operation {0:?}")]
    UnknownOperation(String),
    #[error("resource {key:?} is not supported by the {dialect} dialect")]
    UnsupportedResource { dialect: String, key: String },
    #[error("a bundle needs at least one member")]
    EmptyBundle,
    #[error("job-operation {0} appears twice in a bundle")]
    DuplicateMember(String),
    #[error("bundle size must be at least 1")]
    InvalidBundleSize,
    #[error("invalid condition {0}")]
    InvalidCondition(String),
    #[error("invalid workflow file {path}: {message}")]
    WorkflowFile { path: PathBuf, message: String },
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Document(#[from] DocumentError),
}

/// A named command template with pre- and post-conditions.
#[derive(Debug, Clone)]
pub struct OperationDef {
    pub name: String,
    pub cmd: String,
    pub pre: Vec<Condition>,
    pub post: Vec<Condition>,
}

impl OperationDef {
    pub fn new(name: impl Into<String>, cmd: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cmd: cmd.into(),
            pre: Vec::new(),
            post: Vec::new(),
        }
    }

    pub fn pre(mut self, condition: Condition) -> Self {
        self.pre.push(condition);
        self
    }

    pub fn post(mut self, condition: Condition) -> Self {
        self.post.push(condition);
        self
    }

    pub fn render(&self, job: &Job) -> Result<String, FlowError> {
        render_cmd(&self.cmd, job)
    }
}

/// The eligibility rule on already evaluated conditions.
pub fn eligibility(pre: &[bool], post: &[bool]) -> bool {
    pre.iter().all(|&c| c) && (post.is_empty() || !post.iter().all(|&c| c))
}

/// An operation applied to one job.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobOperation {
    pub job_id: JobId,
    pub op_name: String,
}

impl JobOperation {
    pub fn new(job_id: JobId, op_name: impl Into<String>) -> Self {
        Self {
            job_id,
            op_name: op_name.into(),
        }
    }

    /// `<job_id>-<op_name>`; unique because job ids have a fixed length.
    pub fn id(&self) -> String {
        format!("{}-{}", self.job_id, self.op_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpState {
    /// Every post-condition holds.
    Completed,
    Eligible,
    /// Some pre-condition does not hold.
    Blocked,
}

impl OpState {
    pub fn as_str(self) -> &'static str {
        match self {
            OpState::Completed => "completed",
            OpState::Eligible => "eligible",
            OpState::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpStatus {
    pub state: OpState,
    pub scheduler_status: SchedulerStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobStatus {
    pub job_id: JobId,
    /// In workflow definition order.
    pub operations: Vec<(String, OpStatus)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatusReport {
    pub jobs: Vec<JobStatus>,
}

impl StatusReport {
    /// `{job_id: {op_name: {state, scheduler_status}}}`
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        for job in &self.jobs {
            let mut ops = Map::new();
            for (name, status) in &job.operations {
                ops.insert(name.clone(), serde_json::to_value(status).expect("plain data"));
            }
            out.insert(job.job_id.to_string(), Value::Object(ops));
        }
        Value::Object(out)
    }

    /// Aligned table, one row per job and operation.
    pub fn to_table(&self) -> String {
        let header = ["job_id", "operation", "state", "scheduler"];
        let mut rows: Vec<[String; 4]> = Vec::new();
        for job in &self.jobs {
            for (name, st) in &job.operations {
                rows.push([
                    job.job_id.to_string(),
                    name.clone(),
                    st.state.as_str().to_owned(),
                    st.scheduler_status.as_str().to_owned(),
                ]);
            }
        }
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: [&str; 4]| {
            let text: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", text.join("  ").trim_end());
        };
        line(header);
        for row in &rows {
            line([&row[0], &row[1], &row[2], &row[3]]);
        }
        out
    }
}

/// A project together with an ordered set of operations. Several
/// workflows may act on the same project.
#[derive(Debug, Clone)]
pub struct Workflow {
    project: Project,
    operations: Vec<OperationDef>,
}

impl Workflow {
    pub fn new(project: Project) -> Self {
        Self {
            project,
            operations: Vec::new(),
        }
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn operations(&self) -> &[OperationDef] {
        &self.operations
    }

    pub fn operation(&self, name: &str) -> Option<&OperationDef> {
        self.operations.iter().find(|op| op.name == name)
    }

    /// Appends an operation after checking its name and template syntax.
    pub fn add_operation(&mut self, op: OperationDef) -> Result<&mut Self, FlowError> {
        if op.name.trim().is_empty() {
            return Err(FlowError::EmptyName);
        }
        if self.operation(&op.name).is_some() {
            return Err(FlowError::DuplicateOperation(op.name));
        }
        validate_template(&op.cmd)?;
        self.operations.push(op);
        Ok(self)
    }

    pub fn eligible(&self, op: &OperationDef, job: &Job) -> bool {
        op_eligible(op, &JobContext::new(job))
    }

    /// Eligible operations for `job` in definition order.
    pub fn next_operations(&self, job: &Job) -> Vec<&OperationDef> {
        let ctx = JobContext::new(job);
        self.operations.iter().filter(|op| op_eligible(op, &ctx)).collect()
    }

    pub(crate) fn check_names(&self, names: &[String]) -> Result<(), FlowError> {
        match names.iter().find(|n| self.operation(n).is_none()) {
            Some(n) => Err(FlowError::UnknownOperation(n.clone())),
            None => Ok(()),
        }
    }

    /// Per-job state of every operation. Scheduler states come from the
    /// project's status store.
    pub fn status(&self) -> Result<StatusReport, FlowError> {
        let store = StatusStore::load(&self.project)?;
        self.status_with(|jo_id| store.get(jo_id).map_or(SchedulerStatus::Unknown, |e| e.last_status))
    }

    /// Like [`Workflow::status`] with scheduler states from `lookup`.
    pub fn status_with(&self, lookup: impl Fn(&str) -> SchedulerStatus) -> Result<StatusReport, FlowError> {
        let mut report = StatusReport::default();
        for job in self.project.jobs()? {
            let ctx = JobContext::new(&job);
            let operations = self
                .operations
                .iter()
                .map(|op| {
                    let jo = JobOperation::new(job.id().clone(), op.name.clone());
                    let status = OpStatus {
                        state: op_state(op, &ctx),
                        scheduler_status: lookup(&jo.id()),
                    };
                    (op.name.clone(), status)
                })
                .collect();
            report.jobs.push(JobStatus {
                job_id: job.id().clone(),
                operations,
            });
        }
        Ok(report)
    }
}

fn all_hold(conditions: &[Condition], ctx: &JobContext<'_>) -> bool {
    conditions.iter().all(|c| c.eval_in(ctx))
}

fn op_eligible(op: &OperationDef, ctx: &JobContext<'_>) -> bool {
    all_hold(&op.pre, ctx) && (op.post.is_empty() || !all_hold(&op.post, ctx))
}

fn op_state(op: &OperationDef, ctx: &JobContext<'_>) -> OpState {
    if !op.post.is_empty() && all_hold(&op.post, ctx) {
        OpState::Completed
    } else if all_hold(&op.pre, ctx) {
        OpState::Eligible
    } else {
        OpState::Blocked
    }
}
