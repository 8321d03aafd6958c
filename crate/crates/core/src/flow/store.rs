use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FlowError, Scheduler, SchedulerStatus};
use crate::document::{write_bytes_atomic, DocumentError};
use crate::project::Project;

/// File in the project root recording submissions.
pub const STATUS_FILE: &str = ".flow_status.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub cluster_job_id: String,
    pub last_status: SchedulerStatus,
}

/// Maps job-operation ids to their latest submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusStore {
    path: PathBuf,
    entries: BTreeMap<String, StoreEntry>,
}

impl StatusStore {
    pub fn path_for(project: &Project) -> PathBuf {
        project.root().join(STATUS_FILE)
    }

    /// Reads the store; a missing file is an empty store.
    pub fn load(project: &Project) -> Result<Self, FlowError> {
        Self::load_from(&Self::path_for(project))
    }

    pub fn load_from(path: &Path) -> Result<Self, FlowError> {
        let entries = match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| DocumentError::Corrupt {
                path: path.to_path_buf(),
                source: e,
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => {
                return Err(DocumentError::Io {
                    path: path.to_path_buf(),
                    source,
                }
                .into())
            }
        };
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, jo_id: &str) -> Option<&StoreEntry> {
        self.entries.get(jo_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &StoreEntry)> {
        self.entries.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn record(&mut self, jo_id: impl Into<String>, cluster_job_id: impl Into<String>, status: SchedulerStatus) {
        self.entries.insert(
            jo_id.into(),
            StoreEntry {
                cluster_job_id: cluster_job_id.into(),
                last_status: status,
            },
        );
    }

    /// Copies every known scheduler status into the store.
    pub fn sync_from(&mut self, scheduler: &dyn Scheduler) {
        for (jo_id, entry) in self.entries.iter_mut() {
            let status = scheduler.status(jo_id);
            if status != SchedulerStatus::Unknown {
                entry.last_status = status;
            }
        }
    }

    /// Writes the store atomically.
    pub fn save(&self) -> Result<(), FlowError> {
        let mut bytes = serde_json::to_vec_pretty(&self.entries).expect("plain data");
        bytes.push(b'\n');
        write_bytes_atomic(&self.path, &bytes)?;
        Ok(())
    }
}
