use std::env;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use parking_lot::ReentrantMutex;
use serde_json::{Map, Value};

use super::{io_error, Project, ProjectError};
use crate::document::{read_document, write_bytes_atomic, write_document_atomic, JobDocument};
use crate::id::JobId;
use crate::query::{lookup_path, Lookup};
use crate::statepoint::StatePoint;

pub const STATEPOINT_FILE: &str = "signac_statepoint.json";
pub const DOCUMENT_FILE: &str = "signac_job_document.json";

/// Serializes working-directory changes made through [`Job::with_dir`].
static CWD_LOCK: ReentrantMutex<()> = ReentrantMutex::new(());

/// One state point of a project together with its workspace directory.
#[derive(Clone)]
pub struct Job {
    project: Project,
    id: JobId,
    statepoint: Arc<StatePoint>,
}

impl std::fmt::Debug for Job {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Job")
            .field("id", &self.id)
            .field("statepoint", &self.statepoint)
            .finish()
    }
}

impl Job {
    pub(crate) fn new(project: Project, id: JobId, statepoint: Arc<StatePoint>) -> Self {
        Self {
            project,
            id,
            statepoint,
        }
    }

    pub fn id(&self) -> &JobId {
        &self.id
    }

    pub fn statepoint(&self) -> &StatePoint {
        &self.statepoint
    }

    /// Shorthand for [`Job::statepoint`].
    pub fn sp(&self) -> &StatePoint {
        &self.statepoint
    }

    pub(crate) fn statepoint_arc(&self) -> Arc<StatePoint> {
        self.statepoint.clone()
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    /// `<workspace_dir>/<id>`
    pub fn workspace(&self) -> PathBuf {
        self.project.workspace_dir().join(self.id.as_str())
    }

    /// True once the state point file exists.
    pub fn exists(&self) -> bool {
        self.workspace().join(STATEPOINT_FILE).is_file()
    }

    /// Creates the workspace directory and state point file. Idempotent:
    /// an existing state point file is left alone.
    pub fn init(&self) -> Result<(), ProjectError> {
        let ws = self.workspace();
        let sp_path = ws.join(STATEPOINT_FILE);
        if !sp_path.is_file() {
            fs::create_dir_all(&ws).map_err(io_error(&ws))?;
            let mut bytes = serde_json::to_vec_pretty(&*self.statepoint).expect("state points serialize");
            bytes.push(b'\n');
            write_bytes_atomic(&sp_path, &bytes)?;
        }
        self.project.remember(self.id.clone(), self.statepoint.clone());
        Ok(())
    }

    /// Path of `name` inside the workspace. `name` must be relative and
    /// may not contain `..`.
    pub fn fn_path(&self, name: &str) -> Result<PathBuf, ProjectError> {
        let rel = Path::new(name);
        let ok = !name.is_empty()
            && rel
                .components()
                .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if !ok {
            return Err(ProjectError::InvalidFileName(name.to_owned()));
        }
        Ok(self.workspace().join(rel))
    }

    /// True iff `name` is a regular file in the workspace.
    pub fn isfile(&self, name: &str) -> bool {
        self.fn_path(name).map(|p| p.is_file()).unwrap_or(false)
    }

    pub fn document_path(&self) -> PathBuf {
        self.workspace().join(DOCUMENT_FILE)
    }

    /// Current document; empty if none was written yet.
    pub fn document(&self) -> Result<JobDocument, ProjectError> {
        Ok(read_document(&self.document_path())?.unwrap_or_default())
    }

    /// Replaces the document atomically, initializing the job first.
    pub fn set_document(&self, doc: &JobDocument) -> Result<(), ProjectError> {
        self.init()?;
        write_document_atomic(&self.document_path(), doc)?;
        Ok(())
    }

    /// Read-modify-write of the document. Last writer wins across processes.
    pub fn update_document<F: FnOnce(&mut JobDocument)>(&self, f: F) -> Result<(), ProjectError> {
        let mut doc = self.document()?;
        f(&mut doc);
        self.set_document(&doc)
    }

    /// Runs `action` with the process working directory set to the job
    /// workspace and restores the previous directory afterwards, also when
    /// `action` panics. Calls are serialized process-wide and may nest.
    pub fn with_dir<R>(&self, action: impl FnOnce() -> R) -> Result<R, ProjectError> {
        let ws = self.workspace();
        if !ws.is_dir() {
            return Err(ProjectError::NotInitialized(self.id.clone()));
        }
        let _lock = CWD_LOCK.lock();
        let previous = env::current_dir().map_err(io_error(Path::new(".")))?;
        env::set_current_dir(&ws).map_err(io_error(&ws))?;
        let _restore = RestoreDir(previous);
        Ok(action())
    }
}

struct RestoreDir(PathBuf);

impl Drop for RestoreDir {
    fn drop(&mut self) {
        let _ = env::set_current_dir(&self.0);
    }
}

/// Filter target combining a state point and a job document: paths
/// beginning with `doc.` resolve in the document, all others in the state
/// point.
pub struct JobView<'a> {
    statepoint: &'a Map<String, Value>,
    document: &'a Map<String, Value>,
}

impl<'a> JobView<'a> {
    pub const DOCUMENT_PREFIX: &'static str = "doc.";

    pub fn new(statepoint: &'a Map<String, Value>, document: &'a Map<String, Value>) -> Self {
        Self { statepoint, document }
    }

    pub fn is_document_path(path: &str) -> bool {
        path.starts_with(Self::DOCUMENT_PREFIX)
    }
}

impl Lookup for JobView<'_> {
    fn lookup(&self, path: &str) -> Option<&Value> {
        match path.strip_prefix(Self::DOCUMENT_PREFIX) {
            Some(rest) => lookup_path(self.document, rest),
            None => lookup_path(self.statepoint, path),
        }
    }
}
