//! `signac`: project, query, index and workflow verbs.
//!
//! Exit codes: 0 ok, 1 environment or state error, 2 usage or parse error,
//! 3 not found. Only payload goes to stdout; diagnostics go to stderr.

use std::env;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use signac_core::flow::{
    detect_scheduler_from_env, run, submit, BundleMode, DetectionConfig, FlowError, Outcome, Resources, RunOptions,
    SchedulerKind, SimulatedScheduler, StatusStore, SubmitOptions, Workflow, WorkflowFile,
};
use signac_core::index::{crawl_workspace, export, ExportSink, IndexError, NdjsonSink};
use signac_core::project::FsckProblem;
use signac_core::statepoint::StatePointParseError;
use signac_core::{parse_cli_tokens, JobId, Project, ProjectError, QueryError, StatePoint};

const WORKFLOW_FILE: &str = "workflow.json";
const SCHEDULER_ENV: &str = "SIGNAC_SCHEDULER";

#[derive(Parser)]
#[command(name = "signac", version, about = "Manage parameter-study data spaces and workflows")]
struct Cli {
    /// Workflow definition for status, run and submit [default: <project root>/workflow.json]
    #[arg(long, global = true, value_name = "FILE")]
    workflow: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize a project in the current directory
    Init { name: String },
    /// Print the id (or workspace) of a state point
    Job {
        /// Print the workspace path instead of the id
        #[arg(short = 'w', long)]
        workspace: bool,
        /// Create the job if needed
        #[arg(short = 'c', long)]
        create: bool,
        /// JSON state point; "-" or absent reads stdin
        statepoint: Option<String>,
    },
    /// Print ids of jobs matching a filter
    Find {
        /// `path[.$op] value` pairs or a single JSON filter document
        #[arg(allow_hyphen_values = true, trailing_var_arg = true)]
        tokens: Vec<String>,
    },
    /// Read or write a job document value
    Document {
        id: String,
        #[command(subcommand)]
        action: DocumentAction,
    },
    /// Export one NDJSON record per job
    Index {
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Show operation states per job
    Status {
        #[arg(long)]
        json: bool,
    },
    /// Execute the next eligible operation of each job
    Run(RunArgs),
    /// Submit eligible job-operations to a scheduler
    Submit(SubmitArgs),
    /// Check that every job directory is consistent
    Fsck,
}

#[derive(Subcommand)]
enum DocumentAction {
    /// Print the JSON value at a dotted key
    Get { key: String },
    /// Store a JSON value at a dotted key
    Set { key: String, value: String },
}

#[derive(Args)]
struct RunArgs {
    /// Print commands without executing them
    #[arg(long)]
    pretend: bool,
    /// Repeat until no operation is eligible
    #[arg(long)]
    to_completion: bool,
    /// Number of jobs executed concurrently
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    parallel: u16,
    /// Only these operations
    operations: Vec<String>,
}

#[derive(Args)]
struct SubmitArgs {
    /// Job-operations per script
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    bundle: u32,
    /// Run bundle members concurrently
    #[arg(long)]
    parallel: bool,
    /// simulated, slurm or torque [default: detected]
    #[arg(long, value_name = "NAME")]
    scheduler: Option<String>,
    /// Print the scripts without submitting
    #[arg(long)]
    pretend: bool,
    /// Resource request, e.g. walltime=01:00:00
    #[arg(long = "resource", value_name = "KEY=VALUE", value_parser = parse_resource)]
    resources: Vec<(String, String)>,
    /// Only these operations
    operations: Vec<String>,
}

fn parse_resource(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_owned(), v.to_owned())),
        _ => Err(format!("expected KEY=VALUE, got {s:?}")),
    }
}

/// An error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn env(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        match e {
            ProjectError::InvalidStatePoint(_) | ProjectError::InvalidName(_) | ProjectError::InvalidFileName(_) => {
                Failure::usage(e.to_string())
            }
            _ => Failure::env(e.to_string()),
        }
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<FlowError> for Failure {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Project(p) => p.into(),
            FlowError::UnknownOperation(_)
            | FlowError::UnsupportedResource { .. }
            | FlowError::InvalidBundleSize
            | FlowError::InvalidCondition(_) => Failure::usage(e.to_string()),
            _ => Failure::env(e.to_string()),
        }
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        Failure::env(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            // the reader went away; nothing left to report
            Failure {
                code: 0,
                message: String::new(),
            }
        } else {
            Failure::env(e.to_string())
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = dispatch(cli, &mut out);
    let flushed = out.flush();
    match result {
        Ok(code) => match flushed {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                eprintln!("signac: {e}");
                ExitCode::from(1)
            }
            _ => ExitCode::from(code),
        },
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("signac: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn current_project() -> Result<Project, Failure> {
    let cwd = env::current_dir()?;
    Ok(Project::get(&cwd)?)
}

fn dispatch(cli: Cli, out: &mut impl Write) -> CmdResult {
    match cli.command {
        Command::Init { name } => {
            let cwd = env::current_dir()?;
            let project = Project::init(&name, &cwd).map_err(|e| match e {
                ProjectError::InvalidName(_) => Failure::usage(e.to_string()),
                other => Failure::env(other.to_string()),
            })?;
            writeln!(out, "{}", project.root().display())?;
            Ok(0)
        }
        Command::Job {
            workspace,
            create,
            statepoint,
        } => job(workspace, create, statepoint, out),
        Command::Find { tokens } => {
            let filter = parse_cli_tokens(&tokens)?;
            let project = current_project()?;
            for job in project.find_jobs(filter.as_ref())? {
                writeln!(out, "{}", job.id())?;
            }
            Ok(0)
        }
        Command::Document { id, action } => document(&id, action, out),
        Command::Index { output } => index(output.as_deref(), out),
        Command::Status { json } => {
            let wf = workflow(cli.workflow.as_deref())?;
            let report = wf.status()?;
            if json {
                writeln!(out, "{}", serde_json::to_string(&report.to_json()).expect("plain data"))?;
            } else {
                write!(out, "{}", report.to_table())?;
            }
            Ok(0)
        }
        Command::Run(args) => run_verb(cli.workflow.as_deref(), args, out),
        Command::Submit(args) => submit_verb(cli.workflow.as_deref(), args, out),
        Command::Fsck => {
            let project = current_project()?;
            let report = project.fsck()?;
            for issue in &report.issues {
                let what = match &issue.problem {
                    FsckProblem::ForeignEntry => "not a job directory".to_owned(),
                    FsckProblem::MissingStatePoint => "missing state point file".to_owned(),
                    FsckProblem::Unreadable(why) => format!("unreadable state point: {why}"),
                    FsckProblem::IdMismatch { computed } => format!("state point hashes to {computed}"),
                };
                writeln!(out, "{}\t{what}", issue.path.display())?;
            }
            eprintln!("{} jobs ok, {} issues", report.jobs_ok, report.issues.len());
            Ok(if report.is_clean() { 0 } else { 1 })
        }
    }
}

fn read_statepoint(arg: Option<String>) -> Result<StatePoint, Failure> {
    let text = match arg.as_deref() {
        None | Some("-") => {
            let mut buf = String::new();
            io::stdin().read_to_string(&mut buf)?;
            buf
        }
        Some(text) => text.to_owned(),
    };
    StatePoint::from_json_str(&text).map_err(|e| match e {
        StatePointParseError::Json(e) => Failure::usage(format!("invalid state point JSON: {e}")),
        other => Failure::usage(other.to_string()),
    })
}

fn job(workspace: bool, create: bool, statepoint: Option<String>, out: &mut impl Write) -> CmdResult {
    let sp = read_statepoint(statepoint)?;
    let project = current_project()?;
    let job = project.open_job(sp)?;
    if create {
        job.init()?;
    }
    if workspace {
        writeln!(out, "{}", job.workspace().display())?;
    } else {
        writeln!(out, "{}", job.id())?;
    }
    Ok(0)
}

fn document(id: &str, action: DocumentAction, out: &mut impl Write) -> CmdResult {
    let id: JobId = id.parse().map_err(|e| Failure::usage(format!("{e}")))?;
    let project = current_project()?;
    let job = project.open_job_by_id(&id).map_err(|e| match e {
        ProjectError::UnknownId(_) => Failure::env(e.to_string()),
        other => other.into(),
    })?;
    match action {
        DocumentAction::Get { key } => {
            let doc = job.document()?;
            let value = doc
                .get_path(&key)
                .ok_or_else(|| Failure::not_found(format!("key {key:?} not in the document of {id}")))?;
            writeln!(out, "{}", serde_json::to_string(value).expect("plain data"))?;
        }
        DocumentAction::Set { key, value } => {
            if key.is_empty() || key.split('.').any(str::is_empty) {
                return Err(Failure::usage(format!("invalid key {key:?}")));
            }
            let value: Value =
                serde_json::from_str(&value).map_err(|e| Failure::usage(format!("invalid JSON value: {e}")))?;
            let mut doc = job.document()?;
            doc.set_path(&key, value);
            job.set_document(&doc)?;
        }
    }
    Ok(0)
}

fn index(output: Option<&Path>, out: &mut impl Write) -> CmdResult {
    let project = current_project()?;
    let records = crawl_workspace(&project, Vec::new()).collect::<Result<Vec<_>, _>>()?;
    let written = match output {
        Some(path) => {
            let mut sink = NdjsonSink::create(path).map_err(|e| Failure::env(format!("{}: {e}", path.display())))?;
            let n = export(records, &mut sink).map_err(|e| Failure::env(e.to_string()))?;
            sink.flush()?;
            n
        }
        None => {
            let mut sink = NdjsonSink::new(&mut *out);
            export(records, &mut sink).map_err(|e| Failure::env(e.to_string()))?
        }
    };
    eprintln!("indexed {written} jobs");
    Ok(0)
}

fn workflow(path: Option<&Path>) -> Result<Workflow, Failure> {
    let project = current_project()?;
    let path = path.map_or_else(|| project.root().join(WORKFLOW_FILE), Path::to_path_buf);
    if !path.is_file() {
        return Err(Failure::env(format!("workflow file {} not found", path.display())));
    }
    Ok(WorkflowFile::load(&path)?.into_workflow(project)?)
}

fn run_verb(path: Option<&Path>, args: RunArgs, out: &mut impl Write) -> CmdResult {
    let wf = workflow(path)?;
    let options = RunOptions {
        op_names: args.operations,
        pretend: args.pretend,
        to_completion: args.to_completion,
        parallel: usize::from(args.parallel),
    };
    let report = run(&wf, &options)?;
    let mut stderr = io::stderr().lock();
    for e in &report.executions {
        let _ = stderr.write_all(&e.stdout);
        let _ = stderr.write_all(&e.stderr);
        let jo = e.job_operation.id();
        match &e.outcome {
            Outcome::Pretended => writeln!(out, "{}", e.command)?,
            Outcome::Exited(code) => writeln!(out, "{jo}\texit {code}")?,
            Outcome::Killed => writeln!(out, "{jo}\tkilled")?,
            Outcome::SpawnFailed(why) => writeln!(out, "{jo}\tspawn failed: {why}")?,
            Outcome::TemplateError(why) => writeln!(out, "{jo}\ttemplate error: {why}")?,
            Outcome::AlreadyRunning => writeln!(out, "{jo}\talready running")?,
        }
    }
    let failed = report.failures().count();
    if failed > 0 {
        eprintln!("{failed} job-operations failed");
    }
    if report.cycle_guard_hit {
        eprintln!("stopped: execution bound reached while operations were still eligible");
    }
    Ok(0)
}

fn submit_verb(path: Option<&Path>, args: SubmitArgs, out: &mut impl Write) -> CmdResult {
    let wf = workflow(path)?;
    let config = DetectionConfig {
        override_name: args.scheduler.clone().or_else(|| env::var(SCHEDULER_ENV).ok()),
        ..DetectionConfig::default()
    };
    if let Some(name) = &config.override_name {
        name.parse::<SchedulerKind>().map_err(Failure::usage)?;
    }
    let kind = detect_scheduler_from_env(&config);
    let mut scheduler: Box<dyn signac_core::flow::Scheduler> = match kind {
        SchedulerKind::Simulated => Box::new(SimulatedScheduler::resume(&StatusStore::load(wf.project())?)),
        other => other.build(),
    };
    let options = SubmitOptions {
        op_names: args.operations,
        bundle_size: args.bundle as usize,
        mode: if args.parallel {
            BundleMode::Parallel
        } else {
            BundleMode::Serial
        },
        resources: args.resources.into_iter().collect::<Resources>(),
        pretend: args.pretend,
    };
    let report = submit(&wf, scheduler.as_mut(), &options)?;
    for s in &report.submitted {
        match &s.cluster_job_id {
            None => write!(out, "{}", s.script)?,
            Some(id) => {
                let members: Vec<String> = s.members.iter().map(|m| m.id()).collect();
                writeln!(out, "{id}\t{}", members.join(" "))?;
            }
        }
    }
    if !report.skipped.is_empty() {
        eprintln!("{} job-operations already queued or active", report.skipped.len());
    }
    if args.pretend {
        eprintln!("{} scripts generated ({})", report.submitted.len(), kind.as_str());
    } else {
        writeln!(out, "{} submitted", report.submitted.len())?;
    }
    match report.rejected {
        Some((members, e)) => Err(Failure::env(format!(
            "{e}; stopped at a bundle of {} job-operations, earlier submissions stand",
            members.len()
        ))),
        None => Ok(0),
    }
}
