//! Job documents and lock-free atomic file replacement.
//!
//! Every write goes to a uniquely named temporary sibling which is synced
//! and then renamed over the target. Readers therefore observe either the
//! previous complete file or the new complete file, never a mix.

use std::fs;
use std::io::{self, Write};
use std::ops::{Deref, DerefMut};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::statepoint::{validate_keys, Violation};

/// Persistent key-value mapping attached to a job.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobDocument(Map<String, Value>);

impl JobDocument {
    pub fn new() -> Self {
        Self(Map::new())
    }

    pub fn from_map(map: Map<String, Value>) -> Self {
        Self(map)
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }

    pub fn as_map(&self) -> &Map<String, Value> {
        &self.0
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let v = validate_keys(&self.0);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Value at a dotted path, descending through nested objects only.
    pub fn get_path(&self, path: &str) -> Option<&Value> {
        crate::query::lookup_path(&self.0, path)
    }

    /// Sets the value at a dotted path, creating (or replacing with)
    /// intermediate objects as needed.
    pub fn set_path(&mut self, path: &str, value: Value) {
        let mut segments = path.split('.').peekable();
        let mut map = &mut self.0;
        while let Some(seg) = segments.next() {
            if segments.peek().is_none() {
                map.insert(seg.to_owned(), value);
                return;
            }
            let slot = map.entry(seg.to_owned()).or_insert_with(|| Value::Object(Map::new()));
            if !slot.is_object() {
                *slot = Value::Object(Map::new());
            }
            map = slot.as_object_mut().expect("just ensured object");
        }
    }
}

impl Deref for JobDocument {
    type Target = Map<String, Value>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for JobDocument {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt JSON document {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("document {path} is not a JSON object")]
    NotAnObject { path: PathBuf },
    #[error("invalid document keys: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidKeys(Vec<Violation>),
}

/// Writes `doc` to `path` atomically. The parent directory must exist.
pub fn write_document_atomic(path: &Path, doc: &JobDocument) -> Result<(), DocumentError> {
    write_document_atomic_with_hook(path, doc, |_| Ok(()))
}

/// As [`write_document_atomic`], but runs `before_rename` once the
/// temporary file is fully written and synced. An error from the hook
/// aborts the write: the temporary file is removed and `path` is untouched.
pub fn write_document_atomic_with_hook<F>(path: &Path, doc: &JobDocument, before_rename: F) -> Result<(), DocumentError>
where
    F: FnOnce(&Path) -> io::Result<()>,
{
    doc.validate().map_err(DocumentError::InvalidKeys)?;
    let mut bytes = serde_json::to_vec_pretty(doc).expect("documents always serialize");
    bytes.push(b'\n');
    write_bytes_atomic_with_hook(path, &bytes, before_rename)
}

pub(crate) fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), DocumentError> {
    write_bytes_atomic_with_hook(path, bytes, |_| Ok(()))
}

pub(crate) fn write_bytes_atomic_with_hook<F>(path: &Path, bytes: &[u8], before_rename: F) -> Result<(), DocumentError>
where
    F: FnOnce(&Path) -> io::Result<()>,
{
    let io_err = |source| DocumentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| io_err(io::Error::new(io::ErrorKind::InvalidInput, "path has no file name")))?;

    let mut builder = tempfile::Builder::new();
    let prefix = format!(".{}.", file_name.to_string_lossy());
    builder.prefix(&prefix).suffix(".tmp");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_data().map_err(io_err)?;
    before_rename(tmp.path()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Reads a document; `Ok(None)` if the file does not exist.
pub fn read_document(path: &Path) -> Result<Option<JobDocument>, DocumentError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(DocumentError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    match serde_json::from_slice::<Value>(&bytes) {
        Ok(Value::Object(map)) => Ok(Some(JobDocument(map))),
        Ok(_) => Err(DocumentError::NotAnObject {
            path: path.to_path_buf(),
        }),
        Err(source) => Err(DocumentError::Corrupt {
            path: path.to_path_buf(),
            source,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(v: Value) -> JobDocument {
        JobDocument::from_map(v.as_object().unwrap().clone())
    }

    fn entries(dir: &Path) -> Vec<String> {
        let mut names: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        let d = doc(json!({"V": 10000.0, "nested": {"step": 3}}));
        write_document_atomic(&path, &d).unwrap();
        assert_eq!(read_document(&path).unwrap(), Some(d));
        assert_eq!(entries(dir.path()), ["doc.json"]);
    }

    #[test]
    fn last_writer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        write_document_atomic(&path, &doc(json!({"a": 1}))).unwrap();
        write_document_atomic(&path, &doc(json!({"a": 2}))).unwrap();
        assert_eq!(read_document(&path).unwrap().unwrap()["a"], json!(2));
    }

    #[test]
    fn missing_is_absent() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(read_document(&dir.path().join("nope.json")).unwrap(), None);
    }

    #[test]
    fn garbage_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        fs::write(&path, "{not json").unwrap();
        assert!(matches!(read_document(&path), Err(DocumentError::Corrupt { .. })));
        fs::write(&path, "[1]").unwrap();
        assert!(matches!(read_document(&path), Err(DocumentError::NotAnObject { .. })));
    }

    #[test]
    fn interrupted_write_keeps_old_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        write_document_atomic(&path, &doc(json!({"a": 1}))).unwrap();
        let before = fs::read(&path).unwrap();

        let mut seen_tmp = None;
        let res = write_document_atomic_with_hook(&path, &doc(json!({"a": 2})), |tmp| {
            // the temp sibling holds the complete new content at this point
            let content: Value = serde_json::from_slice(&fs::read(tmp)?)?;
            assert_eq!(content["a"], json!(2));
            seen_tmp = Some(tmp.to_path_buf());
            Err(io::Error::other("simulated crash"))
        });
        assert!(res.is_err());
        assert_eq!(fs::read(&path).unwrap(), before);
        let tmp = seen_tmp.unwrap();
        assert_eq!(tmp.parent(), Some(dir.path()));
        assert!(!tmp.exists());
        assert_eq!(entries(dir.path()), ["doc.json"]);
    }

    #[test]
    fn missing_parent_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("doc.json");
        assert!(matches!(
            write_document_atomic(&path, &JobDocument::new()),
            Err(DocumentError::Io { .. })
        ));
    }

    #[test]
    fn dotted_keys_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        assert!(matches!(
            write_document_atomic(&path, &doc(json!({"a.b": 1}))),
            Err(DocumentError::InvalidKeys(_))
        ));
        assert!(!path.exists());
    }

    #[test]
    fn set_path_creates_nested() {
        let mut d = JobDocument::new();
        d.set_path("a.b.c", json!(1));
        d.set_path("x", json!("y"));
        assert_eq!(
            Value::Object(d.clone().into_map()),
            json!({"a": {"b": {"c": 1}}, "x": "y"})
        );
        assert_eq!(d.get_path("a.b.c"), Some(&json!(1)));
    }
}
