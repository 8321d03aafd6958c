//! Projects: a named data space rooted at a `signac.rc` file, with one
//! workspace directory per job.
//!
//! ```text
//! <root>/signac.rc
//! <root>/workspace/<id>/signac_statepoint.json
//! <root>/workspace/<id>/signac_job_document.json
//! ```
//!
//! A [`Project`] handle caches parsed state points for the lifetime of the
//! handle (a "session"). The workspace directory is listed on every
//! iteration, so new and removed jobs are noticed, but a state point file is
//! parsed at most once per handle until [`Project::refresh`].

mod config;
mod job;

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde_json::{Map, Value};

pub use config::{ProjectConfig, CONFIG_FILE, DEFAULT_WORKSPACE};
pub use job::{Job, JobView, DOCUMENT_FILE, STATEPOINT_FILE};

use crate::canonical::{compute_id, InvalidStatePoint};
use crate::document::DocumentError;
use crate::id::JobId;
use crate::query::Filter;
use crate::statepoint::StatePoint;

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("not a project: no {CONFIG_FILE} found in {0} or any parent directory")]
    NotAProject(PathBuf),
    #[error("{root} is already configured as project {existing:?}, not {requested:?}")]
    NameConflict {
        root: PathBuf,
        existing: String,
        requested: String,
    },
    #[error("invalid project name {0:?}")]
    InvalidName(String),
    #[error(transparent)]
    InvalidStatePoint(#[from] InvalidStatePoint),
    #[error("unknown job id {0}")]
    UnknownId(JobId),
    #[error("corrupt job directory {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("invalid file name {0:?}: must be relative and stay inside the job workspace")]
    InvalidFileName(String),
    #[error("job {0} is not initialized")]
    NotInitialized(JobId),
    #[error("destination already contains job {0}")]
    MoveConflict(JobId),
    #[error("invalid configuration {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Document(#[from] DocumentError),
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A job directory that could not be turned into a job during a scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanIssue {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsckProblem {
    /// Workspace entry whose name is not a job id.
    ForeignEntry,
    MissingStatePoint,
    Unreadable(String),
    IdMismatch {
        computed: JobId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsckIssue {
    pub path: PathBuf,
    pub problem: FsckProblem,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FsckReport {
    pub jobs_ok: usize,
    pub issues: Vec<FsckIssue>,
}

impl FsckReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

struct Inner {
    config: ProjectConfig,
    cache: RwLock<HashMap<JobId, Arc<StatePoint>>>,
    last_issues: Mutex<Vec<ScanIssue>>,
}

/// Handle on a project. Cheap to clone; clones share the session cache.
#[derive(Clone)]
pub struct Project {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Project {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Project").field("config", &self.inner.config).finish()
    }
}

impl Project {
    fn from_config(config: ProjectConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                cache: RwLock::new(HashMap::new()),
                last_issues: Mutex::new(Vec::new()),
            }),
        }
    }

    /// Creates the config file in `root`, or opens the project already
    /// configured there if it has the same name.
    pub fn init(name: &str, root: &Path) -> Result<Self, ProjectError> {
        if name.trim().is_empty() || name.contains(['\n', '\r']) || name.trim() != name {
            return Err(ProjectError::InvalidName(name.to_owned()));
        }
        let root = fs::canonicalize(root).map_err(io_error(root))?;
        if let Some(existing) = ProjectConfig::load(&root)? {
            if existing.project_name != name {
                return Err(ProjectError::NameConflict {
                    root,
                    existing: existing.project_name,
                    requested: name.to_owned(),
                });
            }
            return Ok(Self::from_config(existing));
        }
        Ok(Self::from_config(ProjectConfig::write_new(&root, name)?))
    }

    /// Finds the project whose root is `cwd` or its nearest configured
    /// ancestor.
    pub fn get(cwd: &Path) -> Result<Self, ProjectError> {
        let start = fs::canonicalize(cwd).map_err(io_error(cwd))?;
        for dir in start.ancestors() {
            if let Some(config) = ProjectConfig::load(dir)? {
                return Ok(Self::from_config(config));
            }
        }
        Err(ProjectError::NotAProject(start))
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.inner.config
    }

    pub fn name(&self) -> &str {
        &self.inner.config.project_name
    }

    pub fn root(&self) -> &Path {
        &self.inner.config.root
    }

    pub fn workspace_dir(&self) -> &Path {
        &self.inner.config.workspace_dir
    }

    /// Handle for `sp`; nothing is created on disk.
    pub fn open_job(&self, sp: StatePoint) -> Result<Job, ProjectError> {
        let id = compute_id(&sp)?;
        Ok(Job::new(self.clone(), id, Arc::new(sp)))
    }

    /// Loads an initialized job from disk and verifies its id.
    pub fn open_job_by_id(&self, id: &JobId) -> Result<Job, ProjectError> {
        let dir = self.workspace_dir().join(id.as_str());
        match load_statepoint(&dir, id) {
            Ok(Some(sp)) => Ok(Job::new(self.clone(), id.clone(), Arc::new(sp))),
            Ok(None) => Err(ProjectError::UnknownId(id.clone())),
            Err(reason) => Err(ProjectError::Corrupt { path: dir, reason }),
        }
    }

    /// All initialized jobs in ascending id order.
    pub fn jobs(&self) -> Result<Vec<Job>, ProjectError> {
        Ok(self
            .scan()?
            .into_iter()
            .map(|(id, sp)| Job::new(self.clone(), id, sp))
            .collect())
    }

    /// Number of workspace directories holding a valid state point file.
    pub fn num_jobs(&self) -> Result<usize, ProjectError> {
        Ok(self.scan()?.len())
    }

    /// Directories skipped by the most recent scan because their state
    /// point file was unreadable or did not hash to the directory name.
    pub fn scan_issues(&self) -> Vec<ScanIssue> {
        self.inner.last_issues.lock().clone()
    }

    /// Jobs matching `filter` (all jobs for `None`), ascending by id. Paths
    /// starting with `doc.` address the job document, everything else the
    /// state point.
    pub fn find_jobs(&self, filter: Option<&Filter>) -> Result<Vec<Job>, ProjectError> {
        let jobs = self.jobs()?;
        let Some(filter) = filter else {
            return Ok(jobs);
        };
        let needs_doc = filter.paths().iter().any(|p| JobView::is_document_path(p));
        let mut out = Vec::new();
        for job in jobs {
            let doc = if needs_doc {
                job.document()?.into_map()
            } else {
                Map::new()
            };
            if filter.matches(&JobView::new(job.statepoint(), &doc)) {
                out.push(job);
            }
        }
        Ok(out)
    }

    /// Drops every cached state point.
    pub fn refresh(&self) {
        self.inner.cache.write().clear();
    }

    /// Checks that every workspace directory is a consistent job.
    pub fn fsck(&self) -> Result<FsckReport, ProjectError> {
        let mut report = FsckReport::default();
        let ws = self.workspace_dir();
        let entries = match fs::read_dir(ws) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(report),
            Err(source) => {
                return Err(ProjectError::Io {
                    path: ws.to_path_buf(),
                    source,
                })
            }
        };
        let mut paths: Vec<PathBuf> = entries
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_error(ws))?;
        paths.sort();
        for path in paths {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let problem = if !JobId::is_valid(&name) || !path.is_dir() {
                Some(FsckProblem::ForeignEntry)
            } else {
                let sp_path = path.join(STATEPOINT_FILE);
                match read_statepoint_file(&sp_path) {
                    Ok(None) => Some(FsckProblem::MissingStatePoint),
                    Err(reason) => Some(FsckProblem::Unreadable(reason)),
                    Ok(Some(sp)) => match compute_id(&sp) {
                        Ok(computed) if computed.as_str() == name => None,
                        Ok(computed) => Some(FsckProblem::IdMismatch { computed }),
                        Err(e) => Some(FsckProblem::Unreadable(e.to_string())),
                    },
                }
            };
            match problem {
                None => report.jobs_ok += 1,
                Some(problem) => report.issues.push(FsckIssue { path, problem }),
            }
        }
        Ok(report)
    }

    /// Relocates an initialized job into `destination`'s workspace.
    pub fn move_job(&self, job: &Job, destination: &Project) -> Result<Job, ProjectError> {
        let src = job.workspace();
        if !src.join(STATEPOINT_FILE).is_file() {
            return Err(ProjectError::NotInitialized(job.id().clone()));
        }
        let dest_ws = destination.workspace_dir();
        fs::create_dir_all(dest_ws).map_err(io_error(dest_ws))?;
        let dest = dest_ws.join(job.id().as_str());
        if dest.exists() {
            return Err(ProjectError::MoveConflict(job.id().clone()));
        }
        fs::rename(&src, &dest).map_err(io_error(&src))?;
        self.inner.cache.write().remove(job.id());
        destination.remember(job.id().clone(), job.statepoint_arc());
        Ok(Job::new(destination.clone(), job.id().clone(), job.statepoint_arc()))
    }

    pub(crate) fn remember(&self, id: JobId, sp: Arc<StatePoint>) {
        self.inner.cache.write().insert(id, sp);
    }

    fn scan(&self) -> Result<Vec<(JobId, Arc<StatePoint>)>, ProjectError> {
        let ws = self.workspace_dir();
        let entries = match fs::read_dir(ws) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                self.inner.last_issues.lock().clear();
                return Ok(Vec::new());
            }
            Err(source) => {
                return Err(ProjectError::Io {
                    path: ws.to_path_buf(),
                    source,
                })
            }
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(io_error(ws))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if !JobId::is_valid(name) {
                continue;
            }
            let is_dir = entry.file_type().map(|t| t.is_dir()).unwrap_or(false);
            if is_dir {
                ids.push(name.parse::<JobId>().expect("validated"));
            }
        }
        ids.sort_unstable();

        let mut out: Vec<(JobId, Option<Arc<StatePoint>>)> = {
            let cache = self.inner.cache.read();
            ids.into_iter()
                .map(|id| {
                    let sp = cache.get(&id).cloned();
                    (id, sp)
                })
                .collect()
        };

        let mut issues = Vec::new();
        let mut loaded = Vec::new();
        for (id, slot) in out.iter_mut().filter(|(_, sp)| sp.is_none()) {
            let dir = ws.join(id.as_str());
            match load_statepoint(&dir, id) {
                Ok(Some(sp)) => {
                    let sp = Arc::new(sp);
                    loaded.push((id.clone(), sp.clone()));
                    *slot = Some(sp);
                }
                // a directory without a state point file is not a job
                Ok(None) => {}
                Err(reason) => issues.push(ScanIssue { path: dir, reason }),
            }
        }
        if !loaded.is_empty() {
            self.inner.cache.write().extend(loaded);
        }
        *self.inner.last_issues.lock() = issues;
        Ok(out.into_iter().filter_map(|(id, sp)| sp.map(|sp| (id, sp))).collect())
    }
}

/// Convenience wrappers mirroring the free-function style.
pub fn init_project(name: &str, root: &Path) -> Result<Project, ProjectError> {
    Project::init(name, root)
}

pub fn get_project(cwd: &Path) -> Result<Project, ProjectError> {
    Project::get(cwd)
}

fn read_statepoint_file(path: &Path) -> Result<Option<StatePoint>, String> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.to_string()),
    };
    match serde_json::from_slice::<Value>(&bytes) {
        Ok(Value::Object(map)) => Ok(Some(StatePoint::from_map(map))),
        Ok(_) => Err("state point is not a JSON object".into()),
        Err(e) => Err(format!("unparseable state point: {e}")),
    }
}

/// Reads `<dir>/signac_statepoint.json` and checks it hashes to `id`.
fn load_statepoint(dir: &Path, id: &JobId) -> Result<Option<StatePoint>, String> {
    let Some(sp) = read_statepoint_file(&dir.join(STATEPOINT_FILE))? else {
        return Ok(None);
    };
    let computed = compute_id(&sp).map_err(|e| e.to_string())?;
    if &computed != id {
        return Err(format!("state point hashes to {computed}, not {id}"));
    }
    Ok(Some(sp))
}
