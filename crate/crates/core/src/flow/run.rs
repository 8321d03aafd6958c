use std::collections::HashSet;
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};

use super::{FlowError, JobOperation, Workflow};
use crate::project::Job;

/// Job-operations currently executing in this process, keyed by project
/// root and jo id.
static RUNNING: LazyLock<Mutex<HashSet<(PathBuf, String)>>> = LazyLock::new(Default::default);

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Restrict to these operations; all when empty.
    pub op_names: Vec<String>,
    /// Print commands instead of executing them; a single pass.
    pub pretend: bool,
    /// Repeat passes until nothing is eligible, bounded by
    /// operations × jobs executions.
    pub to_completion: bool,
    /// Jobs executed concurrently; at least 1.
    pub parallel: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            op_names: Vec::new(),
            pretend: false,
            to_completion: false,
            parallel: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pretended,
    Exited(i32),
    /// Terminated by a signal.
    Killed,
    SpawnFailed(String),
    TemplateError(String),
    /// The same job-operation was already executing in this process.
    AlreadyRunning,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Pretended | Outcome::Exited(0))
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub job_operation: JobOperation,
    pub command: String,
    pub outcome: Outcome,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    /// In execution order; within a pass ordered by job id.
    pub executions: Vec<Execution>,
    pub passes: usize,
    /// Set when the execution bound stopped a run that still had eligible
    /// work.
    pub cycle_guard_hit: bool,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Execution> {
        self.executions.iter().filter(|e| !e.outcome.is_success())
    }
}

struct Task {
    job: Job,
    op_name: String,
    command: Result<String, FlowError>,
}

/// Executes the next eligible operation of every job as `sh -c CMD` in
/// the job workspace. A failing job-operation is recorded and not retried
/// within the same call; other jobs continue.
pub fn run(workflow: &Workflow, options: &RunOptions) -> Result<RunReport, FlowError> {
    workflow.check_names(&options.op_names)?;
    let jobs = workflow.project().jobs()?;
    let allowed = |name: &str| options.op_names.is_empty() || options.op_names.iter().any(|n| n == name);
    let num_ops = workflow.operations().iter().filter(|op| allowed(&op.name)).count();
    let budget = num_ops * jobs.len();
    let mut report = RunReport::default();
    let mut failed: HashSet<JobOperation> = HashSet::new();

    loop {
        let tasks: Vec<Task> = jobs
            .iter()
            .filter_map(|job| {
                let op = workflow.next_operations(job).into_iter().find(|op| {
                    allowed(&op.name) && !failed.contains(&JobOperation::new(job.id().clone(), op.name.clone()))
                })?;
                Some(Task {
                    job: job.clone(),
                    op_name: op.name.clone(),
                    command: op.render(job),
                })
            })
            .collect();
        if tasks.is_empty() {
            break;
        }
        let spent = report.executions.len();
        if options.to_completion && spent + tasks.len() > budget {
            report.cycle_guard_hit = true;
            break;
        }
        report.passes += 1;
        let done = execute_all(tasks, options.pretend, options.parallel.max(1));
        for e in &done {
            if !e.outcome.is_success() {
                failed.insert(e.job_operation.clone());
            }
        }
        report.executions.extend(done);
        if options.pretend || !options.to_completion {
            break;
        }
    }
    Ok(report)
}

fn execute_all(tasks: Vec<Task>, pretend: bool, parallel: usize) -> Vec<Execution> {
    if parallel == 1 || tasks.len() == 1 {
        return tasks.into_iter().map(|t| execute(t, pretend)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Task>>> = tasks.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<Execution>>> = slots.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..parallel.min(slots.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(slot) = slots.get(i) else { break };
                let task = slot.lock().unwrap().take().expect("each task is taken once");
                *results[i].lock().unwrap() = Some(execute(task, pretend));
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.into_inner().unwrap().expect("every task ran"))
        .collect()
}

fn execute(task: Task, pretend: bool) -> Execution {
    let job_operation = JobOperation::new(task.job.id().clone(), task.op_name);
    let command = match task.command {
        Ok(c) => c,
        Err(e) => {
            return Execution {
                job_operation,
                command: String::new(),
                outcome: Outcome::TemplateError(e.to_string()),
                stdout: Vec::new(),
                stderr: Vec::new(),
            }
        }
    };
    let mut execution = Execution {
        job_operation,
        command,
        outcome: Outcome::Pretended,
        stdout: Vec::new(),
        stderr: Vec::new(),
    };
    if pretend {
        return execution;
    }
    let key = (task.job.project().root().to_path_buf(), execution.job_operation.id());
    if !RUNNING.lock().unwrap().insert(key.clone()) {
        execution.outcome = Outcome::AlreadyRunning;
        return execution;
    }
    let result = (|| {
        task.job.init().map_err(|e| e.to_string())?;
        Command::new("sh")
            .arg("-c")
            .arg(&execution.command)
            .current_dir(task.job.workspace())
            .output()
            .map_err(|e| e.to_string())
    })();
    RUNNING.lock().unwrap().remove(&key);
    match result {
        Ok(output) => {
            execution.outcome = output.status.code().map_or(Outcome::Killed, Outcome::Exited);
            execution.stdout = output.stdout;
            execution.stderr = output.stderr;
        }
        Err(e) => execution.outcome = Outcome::SpawnFailed(e),
    }
    execution
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Condition, OperationDef};
    use crate::project::Project;
    use crate::statepoint::StatePoint;
    use serde_json::json;

    fn project(n: usize) -> (tempfile::TempDir, Project) {
        let dir = tempfile::tempdir().unwrap();
        let p = Project::init("P", dir.path()).unwrap();
        for i in 0..n {
            p.open_job(StatePoint::try_from(json!({"i": i})).unwrap())
                .unwrap()
                .init()
                .unwrap();
        }
        (dir, p)
    }

    fn two_step(p: &Project) -> Workflow {
        let mut wf = Workflow::new(p.clone());
        wf.add_operation(OperationDef::new("setup", "touch a").post(Condition::file_exists("a")))
            .unwrap()
            .add_operation(
                OperationDef::new("next", "echo {job.sp.i} > b")
                    .pre(Condition::file_exists("a"))
                    .post(Condition::file_exists("b")),
            )
            .unwrap();
        wf
    }

    #[test]
    fn one_pass_runs_first_eligible_only() {
        let (_d, p) = project(3);
        let wf = two_step(&p);
        let r = run(&wf, &RunOptions::default()).unwrap();
        assert_eq!(r.executions.len(), 3);
        assert!(r
            .executions
            .iter()
            .all(|e| e.job_operation.op_name == "setup" && e.outcome == Outcome::Exited(0)));
        for job in p.jobs().unwrap() {
            assert!(job.isfile("a") && !job.isfile("b"));
        }
    }

    #[test]
    fn to_completion_converges() {
        let (_d, p) = project(4);
        let wf = two_step(&p);
        let r = run(
            &wf,
            &RunOptions {
                to_completion: true,
                parallel: 3,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.executions.len(), 8);
        assert!(!r.cycle_guard_hit);
        for job in p.jobs().unwrap() {
            assert!(wf.next_operations(&job).is_empty());
            let i = job.sp()["i"].as_u64().unwrap();
            assert_eq!(
                std::fs::read_to_string(job.fn_path("b").unwrap()).unwrap(),
                format!("{i}\n")
            );
        }
    }

    #[test]
    fn pretend_touches_nothing() {
        let (d, p) = project(2);
        let wf = two_step(&p);
        let before = snapshot(d.path());
        let r = run(
            &wf,
            &RunOptions {
                pretend: true,
                to_completion: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.executions.len(), 2);
        assert!(r
            .executions
            .iter()
            .all(|e| e.outcome == Outcome::Pretended && e.command == "touch a"));
        assert_eq!(snapshot(d.path()), before);
    }

    #[test]
    fn restricted_to_blocked_op_does_nothing() {
        let (_d, p) = project(2);
        let wf = two_step(&p);
        let r = run(
            &wf,
            &RunOptions {
                op_names: vec!["next".into()],
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(r.executions.is_empty());
        assert!(matches!(
            run(
                &wf,
                &RunOptions {
                    op_names: vec!["nope".into()],
                    ..RunOptions::default()
                }
            ),
            Err(FlowError::UnknownOperation(_))
        ));
    }

    #[test]
    fn failures_are_recorded_and_not_retried() {
        let (_d, p) = project(2);
        let mut wf = Workflow::new(p.clone());
        wf.add_operation(OperationDef::new("fail", "exit 3").post(Condition::file_exists("never")))
            .unwrap();
        let r = run(
            &wf,
            &RunOptions {
                to_completion: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.executions.len(), 2);
        assert!(r.executions.iter().all(|e| e.outcome == Outcome::Exited(3)));
        assert_eq!(r.failures().count(), 2);
    }

    #[test]
    fn cycle_guard_stops_ops_that_never_complete() {
        let (_d, p) = project(2);
        let mut wf = Workflow::new(p.clone());
        wf.add_operation(OperationDef::new("noop", "true")).unwrap();
        let r = run(
            &wf,
            &RunOptions {
                to_completion: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(r.cycle_guard_hit);
        assert_eq!(r.executions.len(), 2);
    }

    fn snapshot(root: &std::path::Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out: Vec<_> = walkdir::WalkDir::new(root)
            .into_iter()
            .map(|e| e.unwrap())
            .map(|e| {
                let data = if e.file_type().is_file() {
                    std::fs::read(e.path()).unwrap()
                } else {
                    Vec::new()
                };
                (e.path().to_path_buf(), data)
            })
            .collect();
        out.sort();
        out
    }
}
