//! Filesystem-backed data management for parameter studies.
//!
//! Jobs are addressed by the hash of their state point (the parameter
//! metadata), stored in per-job workspace directories, searchable through a
//! MongoDB-style filter language, indexable into exportable records, and
//! driven by a condition-based workflow engine.

pub mod canonical;
pub mod document;
pub mod flow;
pub mod id;
pub mod index;
pub mod project;
pub mod query;
pub mod statepoint;

pub use canonical::{canonicalize, compute_id, CanonicalForm, InvalidStatePoint};
pub use document::{read_document, write_document_atomic, DocumentError, JobDocument};
pub use flow::{Condition, FlowError, OperationDef, Workflow};
pub use id::JobId;
pub use project::{get_project, init_project, Job, Project, ProjectError};
pub use query::{matches, parse_cli_tokens, parse_filter, Filter, QueryError};
pub use statepoint::{StatePoint, Violation};
