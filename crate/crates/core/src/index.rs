//! Crawling workspaces into index records and exporting them.
//!
//! A crawler turns a directory tree laid out as `<id>/signac_statepoint.json`
//! into a stream of [`IndexRecord`]s. Records can be written to any
//! [`ExportSink`]; NDJSON and in-memory sinks are provided.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::canonical::compute_id;
use crate::document::{read_document, JobDocument};
use crate::id::JobId;
use crate::project::{JobView, Project, DOCUMENT_FILE, STATEPOINT_FILE};
use crate::query::Filter;
use crate::statepoint::StatePoint;

/// Label given to files no rule matches.
pub const DEFAULT_FORMAT: &str = "File";
/// Document key receiving extractor output.
pub const DERIVED_KEY: &str = "derived";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    #[serde(rename = "_id")]
    pub id: JobId,
    pub statepoint: StatePoint,
    /// Absolute path of the job directory.
    pub root: PathBuf,
    pub files: Vec<FileEntry>,
    pub document: JobDocument,
}

impl IndexRecord {
    /// Evaluates `filter` the same way [`Project::find_jobs`] does.
    pub fn matches(&self, filter: &Filter) -> bool {
        filter.matches(&JobView::new(self.statepoint.as_map(), self.document.as_map()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the record root, `/`-separated.
    pub name: String,
    pub size: u64,
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub type Extractor = Arc<dyn Fn(&[u8]) -> Result<Map<String, Value>, String> + Send + Sync>;

/// Assigns a format label to matching files and optionally extracts
/// metadata from their contents.
#[derive(Clone)]
pub struct FormatRule {
    pattern: glob::Pattern,
    label: String,
    extractor: Option<Extractor>,
}

impl fmt::Debug for FormatRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormatRule")
            .field("pattern", &self.pattern.as_str())
            .field("label", &self.label)
            .field("extractor", &self.extractor.is_some())
            .finish()
    }
}

impl FormatRule {
    pub fn new(pattern: &str, label: impl Into<String>) -> Result<Self, glob::PatternError> {
        Ok(Self {
            pattern: glob::Pattern::new(pattern)?,
            label: label.into(),
            extractor: None,
        })
    }

    pub fn with_extractor<F>(mut self, extractor: F) -> Self
    where
        F: Fn(&[u8]) -> Result<Map<String, Value>, String> + Send + Sync + 'static,
    {
        self.extractor = Some(Arc::new(extractor));
        self
    }

    /// Matches against the relative path or the bare file name.
    pub fn matches(&self, rel: &str) -> bool {
        let base = rel.rsplit('/').next().unwrap_or(rel);
        self.pattern.matches(rel) || self.pattern.matches(base)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot index {path}: {reason}")]
    BadJob { path: PathBuf, reason: String },
    #[error("{name:?} is not part of record {id}")]
    NotIndexed { id: JobId, name: String },
    #[error("stale index: {0} no longer exists")]
    Stale(PathBuf),
}

/// Produces index records from a directory tree.
pub trait Crawler {
    fn crawl<'a>(&'a self, root: &Path) -> Box<dyn Iterator<Item = Result<IndexRecord, IndexError>> + 'a>;
}

/// Crawls a workspace directory: one record per `<id>/` directory that
/// holds a state point file, in ascending id order. Never writes.
#[derive(Debug, Clone, Default)]
pub struct WorkspaceCrawler {
    rules: Vec<FormatRule>,
}

impl WorkspaceCrawler {
    pub fn new(rules: Vec<FormatRule>) -> Self {
        Self { rules }
    }

    fn job_dirs(root: &Path) -> Result<Vec<PathBuf>, IndexError> {
        let entries = match fs::read_dir(root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(IndexError::Io {
                    path: root.to_path_buf(),
                    source,
                })
            }
        };
        let mut dirs = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| IndexError::Io {
                path: root.to_path_buf(),
                source,
            })?;
            let name = entry.file_name();
            let is_job = name.to_str().is_some_and(JobId::is_valid)
                && entry.file_type().is_ok_and(|t| t.is_dir())
                && entry.path().join(STATEPOINT_FILE).is_file();
            if is_job {
                dirs.push(entry.path());
            }
        }
        dirs.sort();
        Ok(dirs)
    }

    fn record(&self, dir: &Path) -> Result<IndexRecord, IndexError> {
        let bad = |reason: String| IndexError::BadJob {
            path: dir.to_path_buf(),
            reason,
        };
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let id: JobId = name
            .parse()
            .map_err(|e: crate::id::MalformedJobId| bad(e.to_string()))?;
        let sp_bytes = fs::read(dir.join(STATEPOINT_FILE)).map_err(|source| IndexError::Io {
            path: dir.join(STATEPOINT_FILE),
            source,
        })?;
        let statepoint = match serde_json::from_slice::<Value>(&sp_bytes) {
            Ok(Value::Object(m)) => StatePoint::from_map(m),
            Ok(_) => return Err(bad("state point is not an object".into())),
            Err(e) => return Err(bad(format!("unparseable state point: {e}"))),
        };
        let computed = compute_id(&statepoint).map_err(|e| bad(e.to_string()))?;
        if computed != id {
            return Err(bad(format!("state point hashes to {computed}")));
        }
        let mut document = read_document(&dir.join(DOCUMENT_FILE))
            .map_err(|e| bad(e.to_string()))?
            .unwrap_or_default();

        let mut files = Vec::new();
        let mut derived = Map::new();
        let walker = walkdir::WalkDir::new(dir)
            .min_depth(1)
            .sort_by_file_name()
            .follow_links(false);
        for entry in walker {
            let entry = entry.map_err(|e| bad(e.to_string()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(dir)
                .expect("walkdir yields children")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if rel == STATEPOINT_FILE || rel == DOCUMENT_FILE {
                continue;
            }
            let size = entry.metadata().map(|m| m.len()).unwrap_or(0);
            let rule = self.rules.iter().find(|r| r.matches(&rel));
            let mut file = FileEntry {
                name: rel,
                size,
                format: rule.map_or(DEFAULT_FORMAT, |r| r.label()).to_owned(),
                error: None,
            };
            if let Some(extract) = rule.and_then(|r| r.extractor.as_ref()) {
                let outcome = fs::read(entry.path())
                    .map_err(|e| e.to_string())
                    .and_then(|bytes| extract(&bytes));
                match outcome {
                    Ok(values) => derived.extend(values),
                    Err(msg) => file.error = Some(msg),
                }
            }
            files.push(file);
        }

        if !derived.is_empty() {
            match document.get_mut(DERIVED_KEY) {
                Some(Value::Object(existing)) => existing.extend(derived),
                _ => {
                    document.insert(DERIVED_KEY.to_owned(), Value::Object(derived));
                }
            }
        }

        Ok(IndexRecord {
            id,
            statepoint,
            root: dir.to_path_buf(),
            files,
            document,
        })
    }
}

impl Crawler for WorkspaceCrawler {
    fn crawl<'a>(&'a self, root: &Path) -> Box<dyn Iterator<Item = Result<IndexRecord, IndexError>> + 'a> {
        match Self::job_dirs(root) {
            Ok(dirs) => Box::new(dirs.into_iter().map(move |d| self.record(&d))),
            Err(e) => Box::new(std::iter::once(Err(e))),
        }
    }
}

/// Crawls the workspace of `project`.
pub fn crawl_workspace(
    project: &Project,
    rules: Vec<FormatRule>,
) -> impl Iterator<Item = Result<IndexRecord, IndexError>> {
    let crawler = WorkspaceCrawler::new(rules);
    let root = project.workspace_dir().to_path_buf();
    let dirs = WorkspaceCrawler::job_dirs(&root);
    let (dirs, first_err) = match dirs {
        Ok(d) => (d, None),
        Err(e) => (Vec::new(), Some(Err(e))),
    };
    first_err
        .into_iter()
        .chain(dirs.into_iter().map(move |d| crawler.record(&d)))
}

/// Absolute path of an indexed file, checking it still exists.
pub fn fetch(record: &IndexRecord, name: &str) -> Result<PathBuf, IndexError> {
    if !record.files.iter().any(|f| f.name == name) {
        return Err(IndexError::NotIndexed {
            id: record.id.clone(),
            name: name.to_owned(),
        });
    }
    let path = record.root.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(IndexError::Stale(path))
    }
}

/// Destination for exported records.
pub trait ExportSink {
    fn write(&mut self, record: &IndexRecord) -> io::Result<()>;
    /// Makes every record written so far visible to the consumer.
    fn flush(&mut self) -> io::Result<()>;
}

#[derive(Debug, thiserror::Error)]
#[error("export failed after {written} records: {source}")]
pub struct ExportError {
    pub written: usize,
    #[source]
    pub source: io::Error,
}

/// Writes every record, then flushes. Returns the record count.
pub fn export<I, S>(records: I, sink: &mut S) -> Result<usize, ExportError>
where
    I: IntoIterator<Item = IndexRecord>,
    S: ExportSink + ?Sized,
{
    let mut written = 0;
    for record in records {
        sink.write(&record).map_err(|source| ExportError { written, source })?;
        written += 1;
    }
    sink.flush().map_err(|source| ExportError { written, source })?;
    Ok(written)
}

/// One JSON object per line, `\n`-terminated.
pub struct NdjsonSink<W: Write> {
    out: W,
}

impl<W: Write> NdjsonSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl NdjsonSink<BufWriter<fs::File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(fs::File::create(path)?)))
    }
}

impl<W: Write> ExportSink for NdjsonSink<W> {
    fn write(&mut self, record: &IndexRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Keeps records in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub records: Vec<IndexRecord>,
}

impl ExportSink for MemorySink {
    fn write(&mut self, record: &IndexRecord) -> io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Parses NDJSON produced by [`NdjsonSink`]. Blank lines are skipped.
pub fn read_ndjson<R: BufRead>(reader: R) -> io::Result<Vec<IndexRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
