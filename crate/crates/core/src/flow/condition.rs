use std::cell::OnceCell;
use std::fmt;
use std::sync::Arc;

use serde_json::Value;

use super::FlowError;
use crate::document::JobDocument;
use crate::project::Job;
use crate::query::values_equal;

type Predicate = Arc<dyn Fn(&Job) -> bool + Send + Sync>;

/// A named, total predicate over a job. Missing or unreadable data makes a
/// condition false, never an error.
#[derive(Clone)]
pub struct Condition {
    name: String,
    kind: ConditionKind,
}

#[derive(Clone)]
pub enum ConditionKind {
    FileExists(String),
    DocKeyExists(String),
    DocGte(String, f64),
    DocEq(String, Value),
    Always,
    Never,
    Custom(Predicate),
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Condition({})", self.name)
    }
}

impl Condition {
    pub fn file_exists(name: impl Into<String>) -> Self {
        Self::from_kind(ConditionKind::FileExists(name.into()))
    }

    pub fn doc_key_exists(key: impl Into<String>) -> Self {
        Self::from_kind(ConditionKind::DocKeyExists(key.into()))
    }

    pub fn doc_gte(key: impl Into<String>, threshold: f64) -> Self {
        Self::from_kind(ConditionKind::DocGte(key.into(), threshold))
    }

    pub fn doc_eq(key: impl Into<String>, value: Value) -> Self {
        Self::from_kind(ConditionKind::DocEq(key.into(), value))
    }

    pub fn always() -> Self {
        Self::from_kind(ConditionKind::Always)
    }

    pub fn never() -> Self {
        Self::from_kind(ConditionKind::Never)
    }

    /// A user predicate. It must be pure and must not panic.
    pub fn custom<F>(name: impl Into<String>, predicate: F) -> Self
    where
        F: Fn(&Job) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind: ConditionKind::Custom(Arc::new(predicate)),
        }
    }

    fn from_kind(kind: ConditionKind) -> Self {
        let name = spec_of(&kind).unwrap_or_default();
        Self { name, kind }
    }

    /// Renames the condition, keeping its behaviour.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ConditionKind {
        &self.kind
    }

    /// Textual spec (`file_exists:NAME`, ...) for the built-in helpers.
    pub fn spec(&self) -> Option<String> {
        spec_of(&self.kind)
    }

    /// Parses `file_exists:NAME`, `doc_key_exists:KEY`, `doc_gte:KEY:NUMBER`,
    /// `doc_eq:KEY:JSON`, `always` or `never`.
    pub fn parse_spec(spec: &str) -> Result<Self, FlowError> {
        let invalid = |why: &str| FlowError::InvalidCondition(format!("{spec:?}: {why}"));
        let mut parts = spec.splitn(3, ':');
        let head = parts.next().unwrap_or_default();
        let key = parts.next();
        let rest = parts.next();
        let need_key = || match key {
            Some(k) if !k.is_empty() => Ok(k.to_owned()),
            _ => Err(invalid("missing key")),
        };
        let kind = match head {
            "always" if key.is_none() => ConditionKind::Always,
            "never" if key.is_none() => ConditionKind::Never,
            "file_exists" => {
                // file names may contain ':'
                let name = spec["file_exists:".len().min(spec.len())..].to_owned();
                if name.is_empty() {
                    return Err(invalid("missing file name"));
                }
                ConditionKind::FileExists(name)
            }
            "doc_key_exists" if rest.is_none() => ConditionKind::DocKeyExists(need_key()?),
            "doc_gte" => {
                let key = need_key()?;
                let number: f64 = rest
                    .ok_or_else(|| invalid("missing number"))?
                    .trim()
                    .parse()
                    .map_err(|_| invalid("threshold is not a number"))?;
                if !number.is_finite() {
                    return Err(invalid("threshold must be finite"));
                }
                ConditionKind::DocGte(key, number)
            }
            "doc_eq" => {
                let key = need_key()?;
                let value: Value = serde_json::from_str(rest.ok_or_else(|| invalid("missing value"))?)
                    .map_err(|e| invalid(&format!("value is not JSON: {e}")))?;
                ConditionKind::DocEq(key, value)
            }
            _ => return Err(invalid("unknown condition")),
        };
        Ok(Self::from_kind(kind))
    }

    pub fn evaluate(&self, job: &Job) -> bool {
        self.eval_in(&JobContext::new(job))
    }

    pub(crate) fn eval_in(&self, ctx: &JobContext<'_>) -> bool {
        match &self.kind {
            ConditionKind::FileExists(name) => ctx.job.isfile(name),
            ConditionKind::DocKeyExists(key) => ctx.document().is_some_and(|d| d.get_path(key).is_some()),
            ConditionKind::DocGte(key, threshold) => ctx
                .document()
                .and_then(|d| d.get_path(key).and_then(Value::as_f64))
                .is_some_and(|v| v >= *threshold),
            ConditionKind::DocEq(key, expected) => ctx
                .document()
                .and_then(|d| d.get_path(key))
                .is_some_and(|v| values_equal(v, expected)),
            ConditionKind::Always => true,
            ConditionKind::Never => false,
            ConditionKind::Custom(f) => f(ctx.job),
        }
    }
}

fn spec_of(kind: &ConditionKind) -> Option<String> {
    Some(match kind {
        ConditionKind::FileExists(n) => format!("file_exists:{n}"),
        ConditionKind::DocKeyExists(k) => format!("doc_key_exists:{k}"),
        ConditionKind::DocGte(k, x) => format!("doc_gte:{k}:{x:?}"),
        ConditionKind::DocEq(k, v) => format!("doc_eq:{k}:{v}"),
        ConditionKind::Always => "always".into(),
        ConditionKind::Never => "never".into(),
        ConditionKind::Custom(_) => return None,
    })
}

/// Per-evaluation view of a job that reads its document at most once.
pub(crate) struct JobContext<'a> {
    pub job: &'a Job,
    doc: OnceCell<Option<JobDocument>>,
}

impl<'a> JobContext<'a> {
    pub fn new(job: &'a Job) -> Self {
        Self {
            job,
            doc: OnceCell::new(),
        }
    }

    fn document(&self) -> Option<&JobDocument> {
        self.doc.get_or_init(|| self.job.document().ok()).as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::Project;
    use crate::statepoint::StatePoint;
    use serde_json::json;
    use std::fs;

    fn job() -> (tempfile::TempDir, Job) {
        let dir = tempfile::tempdir().unwrap();
        let p = Project::init("P", dir.path()).unwrap();
        let job = p.open_job(StatePoint::try_from(json!({"kT": 1.0})).unwrap()).unwrap();
        (dir, job)
    }

    #[test]
    fn helpers_evaluate() {
        let (_d, job) = job();
        let init = Condition::file_exists("init.gsd");
        let step = Condition::doc_gte("step", 1e6);
        let has_v = Condition::doc_key_exists("V");
        let tagged = Condition::doc_eq("tag", json!("ok"));
        assert!(!init.evaluate(&job) && !step.evaluate(&job) && !has_v.evaluate(&job));

        job.init().unwrap();
        fs::write(job.fn_path("init.gsd").unwrap(), "").unwrap();
        job.update_document(|d| {
            d.insert("step".into(), json!(999_999));
            d.insert("tag".into(), json!("ok"));
        })
        .unwrap();
        assert!(init.evaluate(&job));
        assert!(!step.evaluate(&job));
        assert!(tagged.evaluate(&job));
        job.update_document(|d| {
            d.insert("step".into(), json!(1_000_000));
        })
        .unwrap();
        assert!(step.evaluate(&job));
        assert!(Condition::always().evaluate(&job));
        assert!(!Condition::never().evaluate(&job));
    }

    #[test]
    fn corrupt_document_is_false_not_error() {
        let (_d, job) = job();
        job.init().unwrap();
        fs::write(job.document_path(), "{broken").unwrap();
        assert!(!Condition::doc_key_exists("V").evaluate(&job));
    }

    #[test]
    fn non_numeric_doc_value_fails_gte() {
        let (_d, job) = job();
        job.update_document(|d| {
            d.insert("step".into(), json!("lots"));
        })
        .unwrap();
        assert!(!Condition::doc_gte("step", 1.0).evaluate(&job));
    }

    #[test]
    fn spec_parsing() {
        for spec in [
            "file_exists:init.gsd",
            "doc_key_exists:V",
            "doc_gte:step:1000000.0",
            "doc_eq:state:{\"a\":1}",
            "always",
            "never",
        ] {
            let c = Condition::parse_spec(spec).unwrap();
            assert_eq!(c.spec().unwrap(), spec);
            assert_eq!(c.name(), spec);
        }
        assert!(matches!(
            Condition::parse_spec("doc_gte:step:1e6").unwrap().kind(),
            ConditionKind::DocGte(k, x) if k == "step" && *x == 1e6
        ));
        for bad in [
            "",
            "bogus:x",
            "doc_gte:step",
            "doc_gte:step:abc",
            "doc_eq:k:{",
            "file_exists:",
            "doc_key_exists:",
        ] {
            assert!(Condition::parse_spec(bad).is_err(), "{bad}");
        }
    }
}
