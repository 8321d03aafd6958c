use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use super::{Dialect, FlowError, JobOperation};

/// Resource requests keyed by the dialect's resource names.
pub type Resources = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BundleMode {
    #[default]
    Serial,
    Parallel,
}

/// A job-operation with its rendered command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundledOperation {
    pub job_operation: JobOperation,
    pub command: String,
    pub workdir: PathBuf,
}

/// Job-operations submitted together as one cluster job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    members: Vec<BundledOperation>,
    mode: BundleMode,
}

impl Bundle {
    pub fn new(members: Vec<BundledOperation>, mode: BundleMode) -> Result<Self, FlowError> {
        if members.is_empty() {
            return Err(FlowError::EmptyBundle);
        }
        let mut seen = HashSet::new();
        for m in &members {
            if !seen.insert(&m.job_operation) {
                return Err(FlowError::DuplicateMember(m.job_operation.id()));
            }
        }
        Ok(Self { members, mode })
    }

    pub fn members(&self) -> &[BundledOperation] {
        &self.members
    }

    pub fn mode(&self) -> BundleMode {
        self.mode
    }

    pub fn job_operations(&self) -> Vec<JobOperation> {
        self.members.iter().map(|m| m.job_operation.clone()).collect()
    }

    /// First member's id, suffixed with `+N` for N further members.
    pub fn default_name(&self) -> String {
        let first = self.members[0].job_operation.id();
        match self.members.len() {
            1 => first,
            n => format!("{first}+{}", n - 1),
        }
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Renders a batch script: shebang, directives (job name first, then the
/// requested resources in dialect table order), the member ids as
/// comments, then the commands.
pub fn generate_script(bundle: &Bundle, dialect: &Dialect, resources: &Resources) -> Result<String, FlowError> {
    if let Some(key) = resources.keys().find(|k| dialect.resource_format(k).is_none()) {
        return Err(FlowError::UnsupportedResource {
            dialect: dialect.name.to_owned(),
            key: key.clone(),
        });
    }
    let mut out = String::from("#!/bin/bash\n");
    let name = resources
        .get("job_name")
        .cloned()
        .unwrap_or_else(|| bundle.default_name());
    for (key, format) in dialect.resources {
        let value = if *key == "job_name" {
            Some(&name)
        } else {
            resources.get(*key)
        };
        if let Some(value) = value {
            let _ = writeln!(out, "{} {}", dialect.directive, format.replace("{}", value));
        }
    }
    out.push('\n');
    for m in bundle.members() {
        let _ = writeln!(out, "# {}", m.job_operation.id());
    }
    for m in bundle.members() {
        let line = format!("(cd {} && {})", shell_quote(&m.workdir.to_string_lossy()), m.command);
        match bundle.mode() {
            BundleMode::Serial => {
                let _ = writeln!(out, "{line}");
            }
            BundleMode::Parallel => {
                let _ = writeln!(out, "{line} &");
            }
        }
    }
    if bundle.mode() == BundleMode::Parallel {
        out.push_str("wait\n");
    }
    Ok(out)
}
