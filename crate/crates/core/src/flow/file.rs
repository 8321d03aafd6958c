use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Condition, FlowError, OperationDef, Workflow};
use crate::project::Project;

/// Declarative workflow definition:
/// `{"operations": [{"name", "cmd", "pre": [spec], "post": [spec]}]}` with
/// condition specs as accepted by [`Condition::parse_spec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowFile {
    pub operations: Vec<OperationSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationSpec {
    pub name: String,
    pub cmd: String,
    #[serde(default)]
    pub pre: Vec<String>,
    #[serde(default)]
    pub post: Vec<String>,
}

impl WorkflowFile {
    pub fn load(path: &Path) -> Result<Self, FlowError> {
        let err = |message: String| FlowError::WorkflowFile {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn into_workflow(self, project: Project) -> Result<Workflow, FlowError> {
        let mut wf = Workflow::new(project);
        for spec in self.operations {
            let mut op = OperationDef::new(spec.name, spec.cmd);
            for c in &spec.pre {
                op = op.pre(Condition::parse_spec(c)?);
            }
            for c in &spec.post {
                op = op.post(Condition::parse_spec(c)?);
            }
            wf.add_operation(op)?;
        }
        Ok(wf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_lj_workflow() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("workflow.json");
        fs::write(
            &path,
            r#"{"operations": [
                {"name": "setup", "cmd": "python operations.py setup {job._id}", "post": ["file_exists:init.gsd"]},
                {"name": "simulate", "cmd": "python operations.py simulate {job._id}",
                 "pre": ["file_exists:init.gsd"], "post": ["doc_gte:step:1e6"]}
            ]}"#,
        )
        .unwrap();
        let project = Project::init("LJ", dir.path()).unwrap();
        let wf = WorkflowFile::load(&path).unwrap().into_workflow(project).unwrap();
        let names: Vec<&str> = wf.operations().iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["setup", "simulate"]);
        assert_eq!(wf.operations()[1].pre[0].name(), "file_exists:init.gsd");
    }

    #[test]
    fn bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let project = Project::init("P", dir.path()).unwrap();
        let path = dir.path().join("wf.json");
        assert!(matches!(WorkflowFile::load(&path), Err(FlowError::WorkflowFile { .. })));
        fs::write(&path, r#"{"operations": [{"name": "a"}]}"#).unwrap();
        assert!(WorkflowFile::load(&path).is_err());
        fs::write(
            &path,
            r#"{"operations": [{"name": "a", "cmd": "x", "post": ["bogus"]}]}"#,
        )
        .unwrap();
        let wf = WorkflowFile::load(&path).unwrap();
        assert!(matches!(wf.into_workflow(project), Err(FlowError::InvalidCondition(_))));
    }
}
