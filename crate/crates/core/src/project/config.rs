use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::ProjectError;
use crate::document::write_bytes_atomic;

/// File marking a project root.
pub const CONFIG_FILE: &str = "signac.rc";
pub const DEFAULT_WORKSPACE: &str = "workspace";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectConfig {
    pub project_name: String,
    pub root: PathBuf,
    /// Absolute workspace location.
    pub workspace_dir: PathBuf,
}

impl ProjectConfig {
    pub fn config_path(&self) -> PathBuf {
        self.root.join(CONFIG_FILE)
    }

    /// Reads `<root>/signac.rc`: `key=value` lines, `#` comments.
    pub(crate) fn load(root: &Path) -> Result<Option<Self>, ProjectError> {
        let path = root.join(CONFIG_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(ProjectError::Io { path, source }),
        };
        let mut name = None;
        let mut workspace = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ProjectError::Config {
                path: path.clone(),
                message: format!("line {}: expected key=value", lineno + 1),
            })?;
            match key.trim() {
                "project" => name = Some(value.trim().to_owned()),
                "workspace_dir" => workspace = Some(value.trim().to_owned()),
                // unknown keys are kept for forward compatibility
                _ => {}
            }
        }
        let project_name = name.filter(|n| !n.is_empty()).ok_or_else(|| ProjectError::Config {
            path: path.clone(),
            message: "missing project name".into(),
        })?;
        let workspace = workspace.unwrap_or_else(|| DEFAULT_WORKSPACE.to_owned());
        Ok(Some(Self {
            project_name,
            root: root.to_path_buf(),
            workspace_dir: root.join(workspace),
        }))
    }

    pub(crate) fn write_new(root: &Path, name: &str) -> Result<Self, ProjectError> {
        let text = format!("project={name}\nworkspace_dir={DEFAULT_WORKSPACE}\n");
        write_bytes_atomic(&root.join(CONFIG_FILE), text.as_bytes())?;
        Ok(Self {
            project_name: name.to_owned(),
            root: root.to_path_buf(),
            workspace_dir: root.join(DEFAULT_WORKSPACE),
        })
    }
}
